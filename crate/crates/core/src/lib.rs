pub mod eval;
pub mod model;
pub mod sim;
pub mod syntax;
pub mod parse;
pub mod render;
pub mod engine;
pub mod oracle;
pub mod globalize;
pub mod random;
pub mod asp;

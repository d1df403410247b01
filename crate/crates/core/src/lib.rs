pub mod checkers;
pub mod corpus;
pub mod evalkit;
pub mod llm;
pub mod perturb;
pub mod pipeline;

pub mod bench;
pub mod cost_models;
pub mod operators;
pub mod parallel;
pub mod ssb_queries;
pub mod storage;
pub mod tile_engine;

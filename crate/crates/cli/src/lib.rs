pub mod app;
pub mod manifest;
pub mod suites;

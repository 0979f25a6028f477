pub mod doc_store;
pub mod extraction;
pub mod gateway;
pub mod ids;
pub mod privacy;
pub mod provider;
pub mod qa;
pub mod retrieval;
pub mod share;
pub mod update_flow;
pub mod workspace;

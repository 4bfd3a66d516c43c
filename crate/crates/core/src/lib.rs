pub mod characteristics;
pub mod girsanov;
pub mod levy;
pub mod models;
pub mod quadrature;
pub mod verify;

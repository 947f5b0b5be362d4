pub mod basis;
pub mod continuation;
pub mod dynamics;
pub mod error;
pub mod gdm;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod presets;

pub use error::{CoreError, Result};

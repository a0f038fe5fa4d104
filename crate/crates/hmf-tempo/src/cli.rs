//! Configuration-driven runners behind the `hmftempo` binary.

use crate::error::Result;

pub fn placeholder() -> Result<()> {
    Ok(())
}

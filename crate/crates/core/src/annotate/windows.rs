use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::AnnotateError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub size: usize,
    pub stride: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            size: 20,
            stride: 15,
        }
    }
}

impl WindowSpec {
    pub fn new(size: usize, stride: usize) -> Result<Self, AnnotateError> {
        let spec = Self { size, stride };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<(), AnnotateError> {
        if self.size == 0 || self.stride == 0 || self.stride > self.size {
            return Err(AnnotateError::Config(format!(
                "window size {} and stride {} must satisfy 0 < stride <= size",
                self.size, self.stride
            )));
        }
        Ok(())
    }
}

/// Window ranges over `count` messages. Windows start every `stride`
/// positions and generation stops at the first window reaching the end.
pub fn make_windows(count: usize, spec: WindowSpec) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < count {
        let end = (start + spec.size).min(count);
        out.push(start..end);
        if end >= count {
            break;
        }
        start += spec.stride;
    }
    out
}

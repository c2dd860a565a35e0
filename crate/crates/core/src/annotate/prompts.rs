use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// System and user prompts for both annotation stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptSet {
    pub stage1_system: &'static str,
    pub stage1_user: &'static str,
    pub stage2_system: &'static str,
    pub stage2_user: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVersion {
    /// The prompts after expert optimization. The only published version.
    #[default]
    Optimized,
}

impl PromptVersion {
    pub fn prompts(self) -> PromptSet {
        match self {
            PromptVersion::Optimized => PromptSet {
                stage1_system: include_str!("../../prompts/optimized/stage1_system.txt"),
                stage1_user: include_str!("../../prompts/optimized/stage1_user.txt"),
                stage2_system: include_str!("../../prompts/optimized/stage2_system.txt"),
                stage2_user: include_str!("../../prompts/optimized/stage2_user.txt"),
            },
        }
    }
}

impl FromStr for PromptVersion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimized" => Ok(PromptVersion::Optimized),
            other => Err(format!("unknown prompt version `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assets_load() {
        let p = PromptVersion::Optimized.prompts();
        assert!(p.stage1_system.starts_with("You are a careful annotator."));
        assert!(p.stage1_user.contains("\"node_id\": \"N1\""));
        assert!(p.stage2_user.contains("- informs: Allowed only between: E -> H, E -> J, E -> C, J -> C, J -> H, J -> J."));
        for text in [p.stage1_system, p.stage1_user, p.stage2_system, p.stage2_user] {
            assert!(!text.contains('\\'));
        }
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Coarse file kind, derived from the file name and location only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LangClass {
    Java,
    Yaml,
    Properties,
    Dockerfile,
    Compose,
    Build,
    Env,
    Other,
}

impl LangClass {
    pub fn as_str(self) -> &'static str {
        match self {
            LangClass::Java => "java",
            LangClass::Yaml => "yaml",
            LangClass::Properties => "properties",
            LangClass::Dockerfile => "dockerfile",
            LangClass::Compose => "compose",
            LangClass::Build => "build",
            LangClass::Env => "env",
            LangClass::Other => "other",
        }
    }
}

impl fmt::Display for LangClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LangClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "java" => LangClass::Java,
            "yaml" => LangClass::Yaml,
            "properties" => LangClass::Properties,
            "dockerfile" => LangClass::Dockerfile,
            "compose" => LangClass::Compose,
            "build" => LangClass::Build,
            "env" => LangClass::Env,
            "other" => LangClass::Other,
            other => return Err(format!("unknown file class `{other}`")),
        })
    }
}

/// One row of the classification table: a `*`-glob over the file name, with
/// an optional requirement that the name or path mention a Spring config
/// location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassRule {
    pub glob: String,
    pub class: LangClass,
    pub spring_config_only: bool,
}

impl ClassRule {
    pub fn new(glob: &str, class: LangClass) -> Self {
        Self {
            glob: glob.to_string(),
            class,
            spring_config_only: false,
        }
    }

    fn matches(&self, path: &str, name: &str) -> bool {
        if !glob_match(&self.glob, name) {
            return false;
        }
        if self.spring_config_only {
            let lower = name.to_ascii_lowercase();
            return lower.contains("application")
                || lower.contains("bootstrap")
                || path.split('/').any(|c| c == "resources");
        }
        true
    }
}

/// First matching rule wins; unmatched files are [`LangClass::Other`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classifier {
    pub rules: Vec<ClassRule>,
}

impl Default for Classifier {
    fn default() -> Self {
        let mut yaml = ClassRule::new("*.yml", LangClass::Yaml);
        yaml.spring_config_only = true;
        let mut yaml2 = ClassRule::new("*.yaml", LangClass::Yaml);
        yaml2.spring_config_only = true;
        Self {
            rules: vec![
                ClassRule::new("*.java", LangClass::Java),
                ClassRule::new("docker-compose*.yml", LangClass::Compose),
                ClassRule::new("docker-compose*.yaml", LangClass::Compose),
                ClassRule::new("compose.yml", LangClass::Compose),
                ClassRule::new("compose.yaml", LangClass::Compose),
                yaml,
                yaml2,
                ClassRule::new("*.properties", LangClass::Properties),
                ClassRule::new("Dockerfile*", LangClass::Dockerfile),
                ClassRule::new("pom.xml", LangClass::Build),
                ClassRule::new("build.gradle", LangClass::Build),
                ClassRule::new("build.gradle.kts", LangClass::Build),
                ClassRule::new("settings.gradle", LangClass::Build),
                ClassRule::new("settings.gradle.kts", LangClass::Build),
                ClassRule::new(".env", LangClass::Env),
            ],
        }
    }
}

impl Classifier {
    pub fn classify(&self, path: &str) -> LangClass {
        let name = path.rsplit('/').next().unwrap_or(path);
        self.rules
            .iter()
            .find(|r| r.matches(path, name))
            .map(|r| r.class)
            .unwrap_or(LangClass::Other)
    }

    /// Adds a rule that takes precedence over the defaults.
    pub fn prepend(&mut self, rule: ClassRule) {
        self.rules.insert(0, rule);
    }
}

/// `*` matches any run of characters; everything else is literal.
fn glob_match(glob: &str, text: &str) -> bool {
    let parts: Vec<&str> = glob.split('*').collect();
    if parts.len() == 1 {
        return glob == text;
    }
    let first = parts[0];
    let last = parts[parts.len() - 1];
    if !text.starts_with(first) || text.len() < first.len() + last.len() || !text.ends_with(last) {
        return false;
    }
    let mut rest = &text[first.len()..text.len() - last.len()];
    for mid in &parts[1..parts.len() - 1] {
        match rest.find(mid) {
            Some(i) => rest = &rest[i + mid.len()..],
            None => return false,
        }
    }
    true
}

use std::collections::BTreeSet;
use std::sync::LazyLock;

use serde::Deserialize;

use crate::error::CatalogError;
use crate::model::{NodeType, Stereotype};

const BUILTIN: &str = include_str!("../../data/images.toml");

#[derive(Debug, Deserialize)]
struct RawCatalog {
    #[serde(default)]
    image: Vec<RawEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    prefix: String,
    #[serde(default)]
    stereotypes: Vec<String>,
    #[serde(rename = "type", default = "default_type")]
    node_type: String,
    #[serde(default)]
    #[allow(dead_code)]
    note: Option<String>,
}

fn default_type() -> String {
    "service".into()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageEntry {
    pub prefix: String,
    pub stereotypes: BTreeSet<Stereotype>,
    pub node_type: NodeType,
}

/// Image-name prefixes with the role a container of that image plays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageCatalog {
    entries: Vec<ImageEntry>,
}

static BUILTIN_CATALOG: LazyLock<ImageCatalog> =
    LazyLock::new(|| ImageCatalog::from_toml(BUILTIN).expect("shipped image catalog is valid"));

impl Default for ImageCatalog {
    fn default() -> Self {
        BUILTIN_CATALOG.clone()
    }
}

impl ImageCatalog {
    pub fn from_toml(text: &str) -> Result<Self, CatalogError> {
        let raw: RawCatalog = toml::from_str(text)?;
        let mut entries = Vec::with_capacity(raw.image.len());
        for e in raw.image {
            let prefix = e.prefix.trim().to_lowercase();
            if prefix.is_empty() {
                return Err(CatalogError::Entry {
                    entry: e.prefix,
                    message: "empty prefix".into(),
                });
            }
            let node_type = match e.node_type.as_str() {
                "service" => NodeType::Service,
                "database" => NodeType::Database,
                "external_entity" => NodeType::ExternalEntity,
                other => {
                    return Err(CatalogError::Entry {
                        entry: prefix,
                        message: format!("unknown type `{other}`"),
                    })
                }
            };
            let mut stereotypes = BTreeSet::new();
            for s in &e.stereotypes {
                let st: Stereotype = s.parse()?;
                let a = st.applicability();
                let ok = if node_type == NodeType::ExternalEntity { a.external } else { a.node };
                if !ok {
                    return Err(CatalogError::Entry {
                        entry: prefix,
                        message: format!("`{st}` does not apply to a {}", node_type.as_str()),
                    });
                }
                stereotypes.insert(st);
            }
            if node_type == NodeType::Database && !stereotypes.is_empty() {
                stereotypes.insert(Stereotype::Database);
            }
            entries.push(ImageEntry {
                prefix,
                stereotypes,
                node_type,
            });
        }
        Ok(Self { entries })
    }

    /// Entries of `overrides` replace same-prefix entries and add new ones.
    pub fn with_overrides(mut self, overrides: ImageCatalog) -> Self {
        for o in overrides.entries {
            self.entries.retain(|e| e.prefix != o.prefix);
            self.entries.push(o);
        }
        self
    }

    pub fn entries(&self) -> &[ImageEntry] {
        &self.entries
    }

    fn best(&self, name: &str) -> Option<&ImageEntry> {
        self.entries
            .iter()
            .filter(|e| {
                name.strip_prefix(e.prefix.as_str())
                    .is_some_and(|rest| rest.is_empty() || !rest.starts_with(|c: char| c.is_ascii_alphanumeric()))
            })
            .max_by_key(|e| e.prefix.len())
    }

    /// Stereotypes and node type for a container image, if the image is known.
    pub fn classify(&self, image: &str) -> Option<(BTreeSet<Stereotype>, NodeType)> {
        let name = image_name(image)?;
        let entry = self.best(&name).or_else(|| {
            let last = name.rsplit('/').next()?;
            (last != name).then(|| self.best(last)).flatten()
        })?;
        if entry.stereotypes.is_empty() {
            return None;
        }
        Some((entry.stereotypes.clone(), entry.node_type))
    }
}

/// Image reference without registry, tag or digest, lowercased.
pub fn image_name(image: &str) -> Option<String> {
    let image = image.trim().trim_matches(|c| c == '"' || c == '\'');
    let image = image.split('@').next()?;
    let mut parts: Vec<&str> = image.split('/').collect();
    if parts.len() > 1 {
        let first = parts[0];
        if first.contains('.') || first.contains(':') || first == "localhost" {
            parts.remove(0);
        }
    }
    let last = parts.pop()?;
    let last = last.split(':').next()?;
    parts.push(last);
    let name = parts.join("/").to_lowercase();
    let name = name.strip_prefix("library/").map(String::from).unwrap_or(name);
    (!name.is_empty()).then_some(name)
}

/// Classification against the shipped catalog.
pub fn classify_image(image: &str) -> Option<(BTreeSet<Stereotype>, NodeType)> {
    BUILTIN_CATALOG.classify(image)
}

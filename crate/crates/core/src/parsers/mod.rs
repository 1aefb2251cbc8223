//! Structured extraction from configuration, infrastructure and build files.

mod build;
mod compose;
mod dockerfile;
mod images;
mod properties;
pub mod yaml;

pub use build::{parse_build, BuildModule};
pub use compose::{parse_compose, parse_port_spec, serialize_compose, synthetic_trace, ComposeFile, PortMapping, ServiceDecl};
pub use dockerfile::{parse_dockerfile, DockerfileInfo};
pub use images::{classify_image, image_name, ImageCatalog, ImageEntry};
pub use properties::{
    parse_java_properties, parse_properties, parse_yaml_properties, PlainTree, PropertyDocument, PropertyFile,
    PropertyMap, PropertyValue,
};

use crate::model::TraceEntry;

/// A parsed value together with where it was read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Traced<T> {
    pub value: T,
    pub trace: TraceEntry,
}

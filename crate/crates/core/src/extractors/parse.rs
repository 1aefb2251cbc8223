use super::{Artifact, Delta, Extractor, ExtractorContext, Phase};
use crate::error::ExtractError;
use crate::model::Stereotype;
use crate::parsers::{parse_build, parse_compose, parse_dockerfile, parse_properties};
use crate::search::LangClass;

pub(crate) fn extractors() -> Vec<Box<dyn Extractor>> {
    vec![
        Box::new(ConfigFiles),
        Box::new(ComposeFiles),
        Box::new(BuildFiles),
        Box::new(Dockerfiles),
    ]
}

/// Spring YAML and `.properties` files.
struct ConfigFiles;

impl Extractor for ConfigFiles {
    fn name(&self) -> &str {
        "config_files"
    }

    fn phase(&self) -> Phase {
        Phase::Parse
    }

    fn emits(&self) -> Vec<Stereotype> {
        Vec::new()
    }

    fn run(&self, ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
        let mut delta = Delta::default();
        let files = ctx
            .index
            .files()
            .iter()
            .filter(|f| matches!(f.class, LangClass::Yaml | LangClass::Properties));
        for f in files {
            match parse_properties(&f.path, &f.text()) {
                Ok(p) => delta.artifacts.push(Artifact::Properties(p)),
                Err(e) => delta.parse_errors.push(e),
            }
        }
        Ok(delta)
    }
}

struct ComposeFiles;

impl Extractor for ComposeFiles {
    fn name(&self) -> &str {
        "compose_files"
    }

    fn phase(&self) -> Phase {
        Phase::Parse
    }

    fn emits(&self) -> Vec<Stereotype> {
        Vec::new()
    }

    fn run(&self, ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
        let mut delta = Delta::default();
        for f in ctx.index.files_of(LangClass::Compose) {
            match parse_compose(&f.path, &f.text()) {
                Ok(c) => delta.artifacts.push(Artifact::Compose(f.path.clone(), c)),
                Err(e) => delta.parse_errors.push(e),
            }
        }
        Ok(delta)
    }
}

struct BuildFiles;

impl Extractor for BuildFiles {
    fn name(&self) -> &str {
        "build_files"
    }

    fn phase(&self) -> Phase {
        Phase::Parse
    }

    fn emits(&self) -> Vec<Stereotype> {
        Vec::new()
    }

    fn run(&self, ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
        let mut delta = Delta::default();
        let (modules, errors) = parse_build(ctx.index);
        delta.artifacts.push(Artifact::Modules(modules));
        delta.parse_errors = errors;
        Ok(delta)
    }
}

struct Dockerfiles;

impl Extractor for Dockerfiles {
    fn name(&self) -> &str {
        "dockerfiles"
    }

    fn phase(&self) -> Phase {
        Phase::Parse
    }

    fn emits(&self) -> Vec<Stereotype> {
        Vec::new()
    }

    fn run(&self, ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
        let mut delta = Delta::default();
        for f in ctx.index.files_of(LangClass::Dockerfile) {
            match parse_dockerfile(&f.path, &f.text()) {
                Ok(d) => delta.artifacts.push(Artifact::Dockerfile(f.path.clone(), d)),
                Err(e) => delta.parse_errors.push(e),
            }
        }
        Ok(delta)
    }
}

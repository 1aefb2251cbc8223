use std::collections::{BTreeMap, BTreeSet};

use super::util::{canonical, resolve_env_default};
use super::{Artifact, Delta, Feature, FeatureKind, RuleSet};
use crate::model::{Node, NodeType, Stereotype, Target, TraceEntry};
use crate::parsers::{image_name, BuildModule, DockerfileInfo, ImageCatalog, PropertyFile, PropertyMap, ServiceDecl, Traced};
use crate::search::{parent_dir, FileIndex, LangClass};

/// Where a service's name came from, strongest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NameSource {
    Spring,
    Compose,
    Module,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub stereotypes: BTreeSet<Stereotype>,
    pub node_type: NodeType,
    pub trace: TraceEntry,
}

/// Everything known about one deployable service after the parse phase.
#[derive(Debug, Clone)]
pub struct ServiceInfo {
    /// Canonical name.
    pub name: String,
    pub display: String,
    pub name_source: NameSource,
    pub name_trace: TraceEntry,
    pub dir: Option<String>,
    pub module: Option<BuildModule>,
    pub compose: Option<ServiceDecl>,
    pub dockerfile: Option<(String, DockerfileInfo)>,
    pub classification: Option<Classification>,
    /// Merged configuration, own files before shared ones.
    pub properties: PropertyMap,
    pub config_files: Vec<String>,
    pub has_code: bool,
    pub port: Option<Traced<String>>,
}

impl ServiceInfo {
    pub fn node_type(&self) -> NodeType {
        self.classification
            .as_ref()
            .map(|c| c.node_type)
            .unwrap_or(NodeType::Service)
    }

    /// Whether `path` lies in this service's directory.
    pub fn contains(&self, path: &str) -> bool {
        match self.dir.as_deref() {
            Some("") => true,
            Some(d) => path.starts_with(d) && path[d.len()..].starts_with('/'),
            None => false,
        }
    }
}

/// Service layout of the analyzed codebase.
#[derive(Debug, Clone, Default)]
pub struct Project {
    services: BTreeMap<String, ServiceInfo>,
    aliases: BTreeMap<String, String>,
    unowned: Vec<PropertyFile>,
    pub warnings: Vec<String>,
}

struct Candidate {
    dir: Option<String>,
    module: Option<BuildModule>,
    compose: Option<ServiceDecl>,
}

fn is_test_path(path: &str) -> bool {
    path.contains("/src/test/") || path.starts_with("src/test/")
}

fn under(path: &str, dir: &str) -> bool {
    dir.is_empty() || (path.starts_with(dir) && path[dir.len()..].starts_with('/'))
}

fn join_dir(base: &str, rel: &str) -> String {
    let mut parts: Vec<&str> = if base.is_empty() { Vec::new() } else { base.split('/').collect() };
    for seg in rel.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                parts.pop();
            }
            s => parts.push(s),
        }
    }
    parts.join("/")
}

fn file_stem(path: &str) -> &str {
    let name = path.rsplit('/').next().unwrap_or(path);
    name.rsplit_once('.').map(|(s, _)| s).unwrap_or(name)
}

/// bootstrap files first, then application files, then anything else.
fn config_rank(path: &str) -> u8 {
    let stem = file_stem(path);
    if stem.starts_with("bootstrap") {
        0
    } else if stem.starts_with("application") {
        1
    } else {
        2
    }
}

fn spring_name(index: &FileIndex, files: &[&PropertyFile]) -> Option<Traced<String>> {
    let mut sorted: Vec<&&PropertyFile> = files.iter().collect();
    sorted.sort_by_key(|f| (config_rank(&f.path), f.path.clone()));
    for f in sorted {
        for d in &f.documents {
            if let Some(v) = d.map.get("spring.application.name") {
                let value = resolve_env_default(index, &v.value, &f.path)?;
                return Some(Traced { value, trace: v.trace.clone() });
            }
        }
    }
    None
}

impl Project {
    pub fn services(&self) -> impl Iterator<Item = &ServiceInfo> {
        self.services.values()
    }

    pub fn service(&self, name: &str) -> Option<&ServiceInfo> {
        self.services
            .get(name)
            .or_else(|| canonical(name).and_then(|c| self.services.get(&c)))
    }

    pub fn len(&self) -> usize {
        self.services.len()
    }

    pub fn is_empty(&self) -> bool {
        self.services.is_empty()
    }

    /// Configuration files not attributed to any service.
    pub fn unowned_config(&self) -> &[PropertyFile] {
        &self.unowned
    }

    /// The service whose directory most specifically contains `path`.
    pub fn owner_of(&self, path: &str) -> Option<&ServiceInfo> {
        self.services
            .values()
            .filter(|s| s.contains(path))
            .max_by_key(|s| s.dir.as_ref().map(String::len).unwrap_or(0))
    }

    /// The service a host name refers to (service, compose key, module or
    /// directory name).
    pub fn resolve_host(&self, host: &str) -> Option<&ServiceInfo> {
        let c = canonical(host)?;
        self.aliases.get(&c).and_then(|n| self.services.get(n))
    }

    pub fn build(index: &FileIndex, artifacts: &[Artifact], catalog: &ImageCatalog, rules: &RuleSet) -> Project {
        let mut project = Project::default();
        let mut props: Vec<&PropertyFile> = Vec::new();
        let mut modules: Vec<&BuildModule> = Vec::new();
        let mut composes: Vec<(&str, &ServiceDecl)> = Vec::new();
        let mut dockerfiles: BTreeMap<String, (String, DockerfileInfo)> = BTreeMap::new();
        for a in artifacts {
            match a {
                Artifact::Properties(p) if !is_test_path(&p.path) => props.push(p),
                Artifact::Properties(_) => {}
                Artifact::Modules(m) => modules.extend(m.iter()),
                Artifact::Compose(path, c) => {
                    composes.extend(c.services.iter().map(|s| (path.as_str(), s)));
                    project.warnings.extend(c.warnings.iter().cloned());
                }
                Artifact::Dockerfile(path, d) => {
                    let dir = parent_dir(path).to_string();
                    let better = match dockerfiles.get(&dir) {
                        None => true,
                        Some((p, _)) => (path.ends_with("/Dockerfile") || path == "Dockerfile", path) < (p.ends_with("/Dockerfile") || p == "Dockerfile", p),
                    };
                    if better {
                        dockerfiles.insert(dir, (path.clone(), d.clone()));
                    }
                }
            }
        }
        props.sort_by(|a, b| a.path.cmp(&b.path));
        modules.sort_by(|a, b| a.dir.cmp(&b.dir));
        modules.dedup_by(|a, b| a.dir == b.dir);
        composes.sort_by(|a, b| (a.0, &a.1.name).cmp(&(b.0, &b.1.name)));

        let mut cands: Vec<Candidate> = modules
            .iter()
            .map(|m| Candidate {
                dir: Some(m.dir.clone()),
                module: Some((*m).clone()),
                compose: None,
            })
            .collect();
        if cands.is_empty() && composes.iter().all(|(_, d)| d.build_context.is_none()) && index.files_of(LangClass::Java).next().is_some() {
            cands.push(Candidate {
                dir: Some(String::new()),
                module: None,
                compose: None,
            });
        }
        let module_dirs: Vec<String> = cands.iter().filter_map(|c| c.dir.clone()).collect();
        let own_files = |dir: &str| -> Vec<&PropertyFile> {
            props
                .iter()
                .copied()
                .filter(|p| under(&p.path, dir))
                .filter(|p| {
                    // not inside a more specific module
                    !module_dirs
                        .iter()
                        .any(|d| d.len() > dir.len() && under(d, dir) && under(&p.path, d))
                })
                .collect()
        };
        let cand_spring: Vec<Option<Traced<String>>> = cands
            .iter()
            .map(|c| c.dir.as_deref().and_then(|d| spring_name(index, &own_files(d))))
            .collect();
        let mut cand_spring = cand_spring;

        for (cfile, decl) in &composes {
            let ctx_dir = decl
                .build_context
                .as_ref()
                .map(|b| join_dir(parent_dir(cfile), &b.value));
            let key = canonical(&decl.name);
            let found = cands.iter().position(|c| {
                c.compose.is_none()
                    && (ctx_dir.is_some() && c.dir == ctx_dir
                        || c.module.as_ref().is_some_and(|m| canonical(&m.name) == key)
                        || c.dir.as_deref().is_some_and(|d| !d.is_empty() && canonical(d.rsplit('/').next().unwrap_or(d)) == key))
            });
            let found = found.or_else(|| {
                cand_spring
                    .iter()
                    .zip(cands.iter())
                    .position(|(s, c)| c.compose.is_none() && s.as_ref().is_some_and(|s| canonical(&s.value) == key))
            });
            match found {
                Some(i) => cands[i].compose = Some((*decl).clone()),
                None => {
                    let dir = ctx_dir.filter(|d| index.files().iter().any(|f| under(&f.path, d)));
                    let spring = dir.as_deref().and_then(|d| spring_name(index, &own_files(d)));
                    cands.push(Candidate {
                        dir,
                        module: None,
                        compose: Some((*decl).clone()),
                    });
                    cand_spring.push(spring);
                }
            }
        }

        for (cand, spring) in cands.into_iter().zip(cand_spring) {
            let (display, source, trace) = if let Some(s) = spring {
                (s.value, NameSource::Spring, s.trace)
            } else if let Some(c) = &cand.compose {
                (c.name.clone(), NameSource::Compose, c.source.clone())
            } else if let Some(m) = &cand.module {
                (m.name.clone(), NameSource::Module, m.trace.clone())
            } else {
                continue;
            };
            let Some(name) = canonical(&display) else { continue };
            if let Some(existing) = project.services.get_mut(&name) {
                project.warnings.push(format!("service name `{name}` declared twice"));
                if existing.compose.is_none() {
                    existing.compose = cand.compose;
                }
                if existing.module.is_none() {
                    existing.module = cand.module;
                }
                if existing.dir.is_none() {
                    existing.dir = cand.dir;
                }
                continue;
            }
            let has_code = cand.dir.as_deref().is_some_and(|d| {
                index
                    .files_of(LangClass::Java)
                    .any(|f| under(&f.path, d) && !is_test_path(&f.path))
            });
            let dockerfile = cand.dir.as_ref().and_then(|d| dockerfiles.get(d).cloned());
            project.services.insert(
                name.clone(),
                ServiceInfo {
                    name,
                    display,
                    name_source: source,
                    name_trace: trace,
                    dir: cand.dir,
                    module: cand.module,
                    compose: cand.compose,
                    dockerfile,
                    classification: None,
                    properties: PropertyMap::default(),
                    config_files: Vec::new(),
                    has_code,
                    port: None,
                },
            );
        }

        project.attach_config(&props);
        for svc in project.services.values_mut() {
            svc.classification = classify(svc, catalog, rules);
            svc.port = port_of(svc);
        }
        project.build_aliases();
        project
    }

    fn attach_config(&mut self, props: &[&PropertyFile]) {
        let mut attached: BTreeMap<String, Vec<(bool, u8, &PropertyFile)>> = BTreeMap::new();
        let by_stem = |p: &PropertyFile| {
            canonical(file_stem(&p.path))
                .filter(|_| config_rank(&p.path) == 2)
                .filter(|s| self.services.contains_key(s))
        };
        // directories served by a config server hold per-service files
        let shared_dirs: BTreeSet<&str> = props
            .iter()
            .filter(|p| by_stem(p).is_some())
            .map(|p| parent_dir(&p.path))
            .collect();
        let mut global: Vec<&PropertyFile> = Vec::new();
        for p in props {
            if config_rank(&p.path) == 1 && shared_dirs.contains(parent_dir(&p.path)) {
                global.push(p);
                continue;
            }
            let target = match by_stem(p) {
                Some(s) => Some((s, true)),
                None => self.owner_of(&p.path).map(|o| (o.name.clone(), false)),
            };
            match target {
                Some((name, shared)) => attached
                    .entry(name)
                    .or_default()
                    .push((shared, config_rank(&p.path), p)),
                None => self.unowned.push((*p).clone()),
            }
        }
        for (name, mut files) in attached {
            files.sort_by(|a, b| (a.0, a.1, &a.2.path).cmp(&(b.0, b.1, &b.2.path)));
            let svc = self.services.get_mut(&name).expect("attached to a known service");
            for (_, _, f) in files {
                svc.properties.extend_from(&f.merged());
                svc.config_files.push(f.path.clone());
            }
        }
        // shared application files reach every config client, last
        for svc in self.services.values_mut() {
            if svc.properties.get("spring.cloud.config.uri").is_none() {
                continue;
            }
            for f in &global {
                svc.properties.extend_from(&f.merged());
                svc.config_files.push(f.path.clone());
            }
        }
        self.unowned.extend(
            global
                .into_iter()
                .filter(|f| !self.services.values().any(|s| s.config_files.contains(&f.path)))
                .cloned(),
        );
    }

    fn build_aliases(&mut self) {
        let mut aliases = BTreeMap::new();
        for s in self.services.values() {
            let mut names = vec![s.display.clone()];
            if let Some(c) = &s.compose {
                names.push(c.name.clone());
            }
            if let Some(m) = &s.module {
                names.push(m.name.clone());
            }
            if let Some(d) = s.dir.as_deref().filter(|d| !d.is_empty()) {
                names.push(d.rsplit('/').next().unwrap_or(d).to_string());
            }
            for n in names {
                if let Some(c) = canonical(&n) {
                    aliases.entry(c).or_insert_with(|| s.name.clone());
                }
            }
        }
        // a service's own name always wins over another's alias
        for s in self.services.values() {
            aliases.insert(s.name.clone(), s.name.clone());
        }
        self.aliases = aliases;
    }

    /// Service nodes with their image-derived stereotypes and ports.
    pub(crate) fn layout_delta(&self) -> Delta {
        let mut delta = Delta::default();
        for s in self.services.values() {
            let Ok(node) = Node::new(&s.display, s.node_type()) else { continue };
            let target = Target::Node(s.name.clone());
            delta.node(node, s.name_trace.clone());
            if let Some(c) = &s.classification {
                for st in &c.stereotypes {
                    delta.stereotype(target.clone(), *st, c.trace.clone());
                }
            }
            if let Some(p) = &s.port {
                delta.tag(target.clone(), "Port", &p.value, p.trace.clone());
                delta.feature(Feature::new(FeatureKind::Port, &s.name, p.trace.clone()).with("port", &p.value));
            }
            if s.name_source != NameSource::Compose {
                if let Some(c) = &s.compose {
                    delta.evidence(target.clone(), "compose_service", c.source.clone());
                }
            }
            if s.name_source != NameSource::Module {
                if let Some(m) = &s.module {
                    delta.evidence(target.clone(), "build_module", m.trace.clone());
                }
            }
        }
        delta
    }
}

fn classify(svc: &ServiceInfo, catalog: &ImageCatalog, rules: &RuleSet) -> Option<Classification> {
    let image = svc.compose.as_ref().and_then(|c| c.image.as_ref());
    if let Some(img) = image {
        if let Some((stereotypes, node_type)) = catalog.classify(&img.value) {
            return Some(Classification {
                stereotypes,
                node_type,
                trace: img.trace.clone(),
            });
        }
    }
    if let Some((_, d)) = &svc.dockerfile {
        if let Some((stereotypes, node_type)) = catalog.classify(&d.base_image.value) {
            return Some(Classification {
                stereotypes,
                node_type,
                trace: d.base_image.trace.clone(),
            });
        }
    }
    if svc.has_code {
        return None;
    }
    // unknown image whose name still says it is a database
    let decl = svc.compose.as_ref()?;
    let (text, trace) = match image {
        Some(img) => (image_name(&img.value).unwrap_or_default(), img.trace.clone()),
        None => (decl.name.to_lowercase(), decl.source.clone()),
    };
    let hit = rules.database_hints.iter().find(|h| text.contains(h.as_str()))?;
    let evidence_start = trace.evidence.to_lowercase().find(hit.as_str());
    let trace = match evidence_start {
        Some(i) => TraceEntry::new(
            trace.file.clone(),
            trace.line,
            crate::model::Span::new(trace.span.start + i, trace.span.start + i + hit.len()),
            &trace.evidence[i..i + hit.len()],
        )
        .unwrap_or(trace),
        None => trace,
    };
    Some(Classification {
        stereotypes: [Stereotype::Database].into_iter().collect(),
        node_type: NodeType::Database,
        trace,
    })
}

fn port_of(svc: &ServiceInfo) -> Option<Traced<String>> {
    if let Some(v) = svc.properties.get("server.port") {
        if v.value.trim().parse::<u16>().is_ok_and(|p| p > 0) {
            return Some(Traced {
                value: v.value.trim().to_string(),
                trace: v.trace.clone(),
            });
        }
    }
    let p = svc.compose.as_ref()?.ports.first()?;
    Some(Traced {
        value: p.value.container.to_string(),
        trace: p.trace.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parsers::{parse_build, parse_compose, parse_properties};
    use crate::search::IndexOptions;

    fn project(files: &[(&str, &str)]) -> Project {
        let index = FileIndex::from_memory(files.iter().copied(), IndexOptions::default());
        let mut artifacts = vec![Artifact::Modules(parse_build(&index).0)];
        for f in index.files() {
            match f.class {
                LangClass::Yaml | LangClass::Properties => {
                    artifacts.push(Artifact::Properties(parse_properties(&f.path, &f.text()).unwrap()))
                }
                LangClass::Compose => {
                    artifacts.push(Artifact::Compose(f.path.clone(), parse_compose(&f.path, &f.text()).unwrap()))
                }
                _ => {}
            }
        }
        Project::build(&index, &artifacts, &ImageCatalog::default(), &RuleSet::default())
    }

    const POM: &str = "<project><artifactId>x</artifactId></project>\n";

    #[test]
    fn spring_name_beats_compose_and_module() {
        let p = project(&[
            ("notif/pom.xml", POM),
            ("notif/src/main/resources/bootstrap.yml", "spring:\n  application:\n    name: notification-service\n"),
            ("notif/src/main/java/App.java", "class App {}\n"),
            ("docker-compose.yml", "services:\n  notifications:\n    build: notif\n    ports:\n      - 8000:8000\n"),
        ]);
        let s = p.service("notification_service").unwrap();
        assert_eq!(s.name_source, NameSource::Spring);
        assert_eq!(s.name_trace.line, 3);
        assert!(s.compose.is_some());
        assert!(s.has_code);
        assert_eq!(s.port.as_ref().unwrap().value, "8000");
        assert_eq!(p.resolve_host("notifications").unwrap().name, "notification_service");
        assert_eq!(p.resolve_host("notif").unwrap().name, "notification_service");
        assert_eq!(p.owner_of("notif/src/main/java/App.java").unwrap().name, "notification_service");
    }

    #[test]
    fn compose_only_services_are_classified() {
        let p = project(&[(
            "docker-compose.yml",
            "services:\n  rabbitmq:\n    image: rabbitmq:3-management\n  shop-db:\n    image: mycorp/shop-mariadb-fork\n  ui:\n    image: mycorp/ui\n",
        )]);
        assert!(p.service("rabbitmq").unwrap().classification.as_ref().unwrap().stereotypes.contains(&Stereotype::MessageBroker));
        let db = p.service("shop_db").unwrap();
        assert_eq!(db.node_type(), NodeType::Database);
        assert_eq!(db.classification.as_ref().unwrap().trace.evidence, "mariadb");
        assert!(p.service("ui").unwrap().classification.is_none());
    }

    #[test]
    fn shared_config_attaches_by_file_name() {
        let p = project(&[
            ("config/pom.xml", POM),
            ("config/src/main/resources/shared/account-service.yml", "server:\n  port: 6000\n"),
            ("account-service/pom.xml", POM),
            ("account-service/src/main/resources/bootstrap.yml", "spring:\n  application:\n    name: account-service\n"),
        ]);
        let a = p.service("account_service").unwrap();
        assert_eq!(a.port.as_ref().unwrap().value, "6000");
        assert_eq!(a.port.as_ref().unwrap().trace.file, "config/src/main/resources/shared/account-service.yml");
        assert!(p.service("config").unwrap().properties.is_empty());
    }

    #[test]
    fn shared_application_file_reaches_config_clients() {
        let p = project(&[
            ("config/pom.xml", POM),
            ("config/src/main/resources/shared/application.yml", "eureka:\n  client:\n    serviceUrl:\n      defaultZone: http://registry:8761/eureka/\n"),
            ("config/src/main/resources/shared/account-service.yml", "server:\n  port: 6000\n"),
            ("account-service/pom.xml", POM),
            (
                "account-service/src/main/resources/bootstrap.yml",
                "spring:\n  application:\n    name: account-service\n  cloud:\n    config:\n      uri: http://config:8888\n",
            ),
        ]);
        let a = p.service("account_service").unwrap();
        assert!(a.properties.get("eureka.client.serviceurl.defaultzone").is_some());
        assert!(p.service("config").unwrap().properties.is_empty());
    }

    #[test]
    fn port_falls_back_to_compose() {
        let p = project(&[("docker-compose.yml", "services:\n  web:\n    image: nginx\n    ports:\n      - \"80:8080\"\n")]);
        assert_eq!(p.service("web").unwrap().port.as_ref().unwrap().value, "8080");
    }
}

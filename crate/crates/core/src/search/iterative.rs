use regex::Regex;

use super::{env::parse_env_token, parent_dir, FileIndex, IndexedFile, Keyword, Match};
use crate::error::SearchError;
use crate::model::Span;

/// Longest chain the Java profile produces: seed, definition, environment.
pub const MAX_CHAIN_LEN: usize = 3;

/// Pulls developer-chosen identifiers out of a seed line. The pattern must
/// have a named group `id`.
#[derive(Debug, Clone)]
pub struct IdentifierRule {
    re: Regex,
}

impl IdentifierRule {
    pub fn new(pattern: &str) -> Result<Self, SearchError> {
        let re = Regex::new(pattern)?;
        if !re.capture_names().any(|n| n == Some("id")) {
            return Err(SearchError::Pattern(regex::Error::Syntax(format!(
                "pattern `{pattern}` has no `id` group"
            ))));
        }
        Ok(Self { re })
    }

    /// The variable an instance of `class` is bound to, as in
    /// `Foo foo = new Foo();` or a `Foo foo` parameter.
    pub fn declared_instance(class: &str) -> Self {
        let pattern = format!(
            r"\b{}(?:<[^>]*>)?\s+(?P<id>[A-Za-z_$][\w$]*)\s*[=;),]",
            regex::escape(class)
        );
        Self::new(&pattern).expect("escaped class name")
    }

    /// The value of `attr = <value>` inside an annotation or call.
    pub fn attribute(attr: &str) -> Self {
        let pattern = format!(
            r#"\b{}\s*=\s*(?P<id>"[^"]*"|\$\{{[^}}]*\}}|[A-Za-z_][\w.]*)"#,
            regex::escape(attr)
        );
        Self::new(&pattern).expect("escaped attribute name")
    }

    /// Every identifier on `line` with its byte span.
    pub fn extract<'a>(&self, line: &'a str) -> Vec<(&'a str, Span)> {
        self.re
            .captures_iter(line)
            .filter_map(|c| c.name("id"))
            .filter(|m| !m.as_str().is_empty())
            .map(|m| (m.as_str(), Span::new(m.start(), m.end())))
            .collect()
    }
}

/// Ordered evidence from a seed hit to the line that completes the feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceChain {
    pub links: Vec<Match>,
    pub extracted_identifier: String,
    pub resolved: bool,
    /// Literal the identifier stands for, when the chain resolved a value.
    pub value: Option<String>,
}

impl EvidenceChain {
    fn dead_end(seed: Match, identifier: &str) -> Self {
        Self {
            links: vec![seed],
            extracted_identifier: identifier.to_string(),
            resolved: false,
            value: None,
        }
    }

    pub fn seed(&self) -> &Match {
        &self.links[0]
    }

    pub fn last(&self) -> &Match {
        self.links.last().expect("chains are never empty")
    }
}

fn unquote(s: &str) -> Option<&str> {
    let s = s.trim();
    (s.len() >= 2 && s.starts_with('"') && s.ends_with('"')).then(|| &s[1..s.len() - 1])
}

/// Finds `name = <value>` on a line and returns the value text and its span,
/// with string quotes removed.
fn definition_on_line(line: &str, name: &str) -> Option<(String, Span)> {
    let re = Regex::new(&format!(r"\b{}\s*=\s*(?P<v>[^;]+)", regex::escape(name))).ok()?;
    let caps = re.captures(line)?;
    let v = caps.name("v")?;
    let raw = v.as_str().trim_end();
    let lead = raw.len() - raw.trim_start().len();
    let start = v.start() + lead;
    let text = raw.trim_start();
    if text.is_empty() || text.starts_with('=') {
        return None;
    }
    if let Some(inner) = unquote(text) {
        if inner.is_empty() {
            return None;
        }
        return Some((inner.to_string(), Span::new(start + 1, start + 1 + inner.len())));
    }
    Some((text.to_string(), Span::new(start, start + text.len())))
}

impl FileIndex {
    /// Maps `Stem.rest` to a file named `Stem.*` near `origin`, plus `rest`.
    pub fn resolve_cross_file(&self, dotted: &str, origin: &str) -> Option<(String, String)> {
        let (stem, rest) = dotted.trim().split_once('.')?;
        if stem.is_empty() || rest.is_empty() {
            return None;
        }
        let java_name = format!("{stem}.java");
        let candidates: Vec<&IndexedFile> = self
            .files()
            .iter()
            .filter(|f| {
                let n = f.file_name();
                n == java_name || n.split_once('.').is_some_and(|(s, _)| s == stem)
            })
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let dir = parent_dir(origin);
        let pick = candidates
            .iter()
            .find(|f| f.dir() == dir && f.file_name() == java_name)
            .or_else(|| {
                let imports = self.imports_of(origin, stem);
                candidates
                    .iter()
                    .find(|f| imports.iter().any(|imp| f.path.ends_with(imp.as_str())))
            })
            .or_else(|| candidates.iter().find(|f| f.file_name() == java_name))
            .or_else(|| candidates.first())?;
        Some((pick.path.clone(), rest.to_string()))
    }

    /// `a/b/Stem.java` suffixes for `import a.b.Stem;` lines in `origin`.
    fn imports_of(&self, origin: &str, stem: &str) -> Vec<String> {
        let Some(f) = self.file(origin) else {
            return Vec::new();
        };
        f.lines
            .iter()
            .filter_map(|l| {
                let body = l.trim().strip_prefix("import ")?.trim_end_matches(';').trim();
                let body = body.strip_prefix("static ").unwrap_or(body);
                let last = body.rsplit('.').next()?;
                (last == stem).then(|| format!("{}.java", body.replace('.', "/")))
            })
            .collect()
    }

    fn definition_in_file(&self, path: &str, name: &str) -> Option<(Match, String)> {
        let f = self.file(path)?;
        f.lines.iter().enumerate().find_map(|(i, line)| {
            if f.is_comment_line(i) && self.options().skip_comments {
                return None;
            }
            let (value, span) = definition_on_line(line, name)?;
            Some((
                Match {
                    file: f.path.clone(),
                    line: i + 1,
                    span,
                    line_text: line.clone(),
                },
                value,
            ))
        })
    }

    /// Appends the `.env` link when `value` is itself an environment token.
    fn finish_with_env(&self, mut chain: EvidenceChain, value: String, origin: &str) -> EvidenceChain {
        if parse_env_token(&value).is_some() && chain.links.len() < MAX_CHAIN_LEN {
            match self.resolve_env_var_traced(&value, origin) {
                Some(r) => {
                    if let Some(def) = r.definition {
                        chain.links.push(def);
                    }
                    chain.value = Some(r.value);
                    chain.resolved = true;
                }
                None => {
                    chain.value = None;
                    chain.resolved = false;
                }
            }
            return chain;
        }
        chain.value = Some(value);
        chain.resolved = true;
        chain
    }

    /// Resolves the literal an identifier seen on `seed`'s line stands for:
    /// a string literal is its own value, `${..}` goes through `.env`, a
    /// dotted name jumps to the file named by its first segment, and a plain
    /// name is looked up as a definition in the same file.
    pub fn resolve_identifier(&self, seed: &Match, identifier: &str) -> EvidenceChain {
        let identifier = identifier.trim();
        let chain = EvidenceChain::dead_end(seed.clone(), identifier);
        if let Some(inner) = unquote(identifier) {
            return self.finish_with_env(chain, inner.to_string(), &seed.file);
        }
        if parse_env_token(identifier).is_some() {
            return self.finish_with_env(chain, identifier.to_string(), &seed.file);
        }
        if identifier.contains('.') {
            if let Some((path, rest)) = self.resolve_cross_file(identifier, &seed.file) {
                if let Some((m, value)) = self.definition_in_file(&path, &rest) {
                    let mut chain = chain;
                    chain.links.push(m);
                    return self.finish_with_env(chain, value, &path);
                }
            }
            return chain;
        }
        match self.definition_in_file(&seed.file, identifier) {
            Some((m, value)) if m.line != seed.line || m.span != seed.span => {
                let mut chain = chain;
                chain.links.push(m);
                self.finish_with_env(chain, value, &seed.file)
            }
            _ => chain,
        }
    }

    /// Seed hit, identifier extraction, then `identifier.member` usage. With
    /// an empty `follow` list the identifier's value is resolved instead.
    pub fn iterative_search(
        &self,
        seed: &str,
        rule: &IdentifierRule,
        follow: &[&str],
    ) -> Result<Vec<EvidenceChain>, SearchError> {
        let mut seeds = self.find_keyword(Keyword::Literal(seed), None)?;
        // one chain set per seed line, anchored at its first hit
        seeds.dedup_by(|b, a| a.file == b.file && a.line == b.line);
        let mut chains = Vec::new();
        for hit in seeds {
            for (id, _) in rule.extract(&hit.line_text) {
                if follow.is_empty() {
                    chains.push(self.resolve_identifier(&hit, id));
                    continue;
                }
                let found = self.member_usages(&hit, id, follow)?;
                if found.is_empty() {
                    chains.push(EvidenceChain::dead_end(hit.clone(), id));
                }
                for m in found {
                    chains.push(EvidenceChain {
                        links: vec![hit.clone(), m],
                        extracted_identifier: id.to_string(),
                        resolved: true,
                        value: None,
                    });
                }
            }
        }
        chains.sort_by(|a, b| a.links.cmp(&b.links));
        chains.dedup();
        Ok(chains)
    }

    fn member_usages(&self, seed: &Match, id: &str, follow: &[&str]) -> Result<Vec<Match>, SearchError> {
        let mut out = Vec::new();
        for member in follow {
            let pat = format!(r"\b{}\s*\.\s*{}\b", regex::escape(id), regex::escape(member));
            let re = Regex::new(&pat)?;
            let mut hits = self.find_in_file(&seed.file, Keyword::Compiled(&re))?;
            if hits.is_empty() && id.contains('.') {
                if let Some((path, rest)) = self.resolve_cross_file(id, &seed.file) {
                    let pat = format!(r"\b{}\s*\.\s*{}\b", regex::escape(&rest), regex::escape(member));
                    hits = self.find_in_file(&path, Keyword::Compiled(&Regex::new(&pat)?))?;
                }
            }
            out.extend(hits);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::IndexOptions;

    fn idx(files: &[(&str, &str)]) -> FileIndex {
        FileIndex::from_memory(files.iter().copied(), IndexOptions::default())
    }

    const USER_SERVICE: &str = "package a.b;\n\
        import org.springframework.security.crypto.bcrypt.BCryptPasswordEncoder;\n\
        public class UserServiceImpl {\n\
        \tprivate static final BCryptPasswordEncoder encoder = new BCryptPasswordEncoder();\n\
        \tpublic void create(User user) {\n\
        \t\tString hash = encoder.encode(user.getPwd());\n\
        \t}\n\
        }\n";

    #[test]
    fn bcrypt_chain() {
        let i = idx(&[("auth/src/main/java/a/b/UserServiceImpl.java", USER_SERVICE)]);
        let rule = IdentifierRule::declared_instance("BCryptPasswordEncoder");
        let chains = i.iterative_search("BCryptPasswordEncoder", &rule, &["encode"]).unwrap();
        let resolved: Vec<_> = chains.iter().filter(|c| c.resolved).collect();
        assert_eq!(resolved.len(), 1);
        let c = resolved[0];
        assert_eq!(c.extracted_identifier, "encoder");
        assert_eq!(c.links.len(), 2);
        assert_eq!(c.links[0].line, 4);
        assert_eq!(c.links[1].line, 6);
        assert_eq!(c.links[1].text(), "encoder.encode");
    }

    #[test]
    fn seed_without_usage_is_unresolved() {
        let src = "class A {\n  BCryptPasswordEncoder encoder = new BCryptPasswordEncoder();\n}\n";
        let i = idx(&[("A.java", src)]);
        let rule = IdentifierRule::declared_instance("BCryptPasswordEncoder");
        let chains = i.iterative_search("BCryptPasswordEncoder", &rule, &["encode"]).unwrap();
        assert!(!chains.is_empty());
        assert!(chains.iter().all(|c| !c.resolved && c.links.len() == 1));
    }

    #[test]
    fn cross_file_resolution() {
        let i = idx(&[
            ("a/b/Service.java", "@FeignClient(name = Clients.ACCOUNT)\n"),
            ("a/b/Clients.java", "class Clients {\n  static final String ACCOUNT = \"account-service\";\n}\n"),
        ]);
        assert_eq!(
            i.resolve_cross_file("Clients.ACCOUNT", "a/b/Service.java"),
            Some(("a/b/Clients.java".to_string(), "ACCOUNT".to_string()))
        );
        assert_eq!(i.resolve_cross_file("Other.ACCOUNT", "a/b/Service.java"), None);
        assert_eq!(i.resolve_cross_file("plain_identifier", "a/b/Service.java"), None);

        let chains = i
            .iterative_search("@FeignClient", &IdentifierRule::attribute("name"), &[])
            .unwrap();
        assert_eq!(chains.len(), 1);
        let c = &chains[0];
        assert!(c.resolved);
        assert_eq!(c.value.as_deref(), Some("account-service"));
        assert_eq!(c.last().file, "a/b/Clients.java");
        assert_eq!(c.last().text(), "account-service");
    }

    #[test]
    fn import_guides_jump() {
        let i = idx(&[
            ("x/Svc.java", "import p.q.Names;\nuse(Names.A);\n"),
            ("p/q/Names.java", "String A = \"right\";\n"),
            ("a/Names.java", "String A = \"wrong\";\n"),
        ]);
        assert_eq!(
            i.resolve_cross_file("Names.A", "x/Svc.java").unwrap().0,
            "p/q/Names.java"
        );
    }

    #[test]
    fn env_third_link() {
        let i = idx(&[
            (".env", "ACCOUNT_HOST=account-service\n"),
            ("a/Svc.java", "@FeignClient(name = Hosts.ACCOUNT)\n"),
            ("a/Hosts.java", "String ACCOUNT = \"${ACCOUNT_HOST}\";\n"),
        ]);
        let chains = i
            .iterative_search("@FeignClient", &IdentifierRule::attribute("name"), &[])
            .unwrap();
        assert_eq!(chains[0].links.len(), 3);
        assert_eq!(chains[0].value.as_deref(), Some("account-service"));
        assert!(chains.iter().all(|c| c.links.len() <= MAX_CHAIN_LEN));
    }

    #[test]
    fn rule_needs_id_group() {
        assert!(IdentifierRule::new(r"\w+").is_err());
        assert!(IdentifierRule::new(r"(?P<id>\w+)").is_ok());
    }
}

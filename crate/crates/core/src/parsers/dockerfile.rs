use super::Traced;
use crate::error::ParseError;
use crate::model::TraceEntry;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DockerfileInfo {
    /// Image of the last `FROM`.
    pub base_image: Traced<String>,
    pub exposed_ports: Vec<u16>,
}

fn instruction(line: &str) -> Option<(&str, &str, usize)> {
    let t = line.trim_start();
    if t.is_empty() || t.starts_with('#') {
        return None;
    }
    let indent = line.len() - t.len();
    let (word, rest) = t.split_once(char::is_whitespace)?;
    let rest_start = indent + word.len() + (rest.len() - rest.trim_start().len()) + 1;
    Some((word, rest.trim(), rest_start))
}

pub fn parse_dockerfile(file: &str, content: &str) -> Result<DockerfileInfo, ParseError> {
    let mut base: Option<Traced<String>> = None;
    let mut ports = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        let Some((word, rest, start)) = instruction(raw) else {
            continue;
        };
        match word.to_ascii_uppercase().as_str() {
            "FROM" => {
                let mut offset = start;
                let mut tokens = rest.split_whitespace();
                let mut image = None;
                for tok in tokens.by_ref() {
                    let pos = raw[offset..].find(tok).map(|p| p + offset).unwrap_or(offset);
                    offset = pos + tok.len();
                    if !tok.starts_with("--") {
                        image = Some((tok, pos));
                        break;
                    }
                }
                let Some((image, pos)) = image else {
                    return Err(ParseError::new(file, i + 1, "FROM without an image"));
                };
                let trace = TraceEntry::at(file, i + 1, raw, pos, image)
                    .ok_or_else(|| ParseError::new(file, i + 1, "cannot locate image"))?;
                base = Some(Traced {
                    value: image.to_string(),
                    trace,
                });
            }
            "EXPOSE" => {
                for tok in rest.split_whitespace() {
                    let num = tok.split('/').next().unwrap_or(tok);
                    match num.parse::<u16>() {
                        Ok(p) if p > 0 => ports.push(p),
                        _ if num.starts_with('$') => {}
                        _ => return Err(ParseError::new(file, i + 1, format!("bad port `{tok}`"))),
                    }
                }
            }
            _ => {}
        }
    }
    let base_image = base.ok_or_else(|| ParseError::new(file, 1, "no FROM instruction"))?;
    Ok(DockerfileInfo {
        base_image,
        exposed_ports: ports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_stage() {
        let d = parse_dockerfile("Dockerfile", "FROM openjdk:8\nADD x.jar app.jar\nEXPOSE 8000\n").unwrap();
        assert_eq!(d.base_image.value, "openjdk:8");
        assert_eq!(d.exposed_ports, vec![8000]);
        assert_eq!(d.base_image.trace.span.start, 5);
    }

    #[test]
    fn last_from_wins() {
        let src = "FROM maven:3 AS build\nRUN mvn package\nFROM --platform=linux/amd64 eclipse-temurin:17\n";
        let d = parse_dockerfile("Dockerfile", src).unwrap();
        assert_eq!(d.base_image.value, "eclipse-temurin:17");
        assert_eq!(d.base_image.trace.line, 3);
        assert!(d.exposed_ports.is_empty());
    }

    #[test]
    fn missing_from() {
        assert!(parse_dockerfile("Dockerfile", "EXPOSE 80\n").is_err());
    }
}

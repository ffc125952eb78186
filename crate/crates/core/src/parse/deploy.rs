use super::{check_unique, PResult, Parsed, Parser};
use crate::model::{DeploymentSpec, DeviceDecl, NameRef};

/// Parses a deployment (`.deploy.mydsl`) file.
pub fn parse_deployment(text: &str, file: &str) -> Parsed<DeploymentSpec> {
    let mut p = Parser::new(text, file);
    let mut spec = DeploymentSpec::default();
    if p.expect("devices").is_ok() {
        let _ = p.block(|p| {
            let d = device(p)?;
            spec.devices.push(d);
            Ok(())
        });
        p.finish();
    }
    check_unique(
        &mut p.diags,
        "DuplicateDevice",
        "device",
        spec.devices.iter().map(|d| (d.name.as_str(), &d.span)),
    );
    p.into_result(spec)
}

#[derive(Default)]
struct Props {
    location: Option<String>,
    resources: Option<Vec<NameRef>>,
    platform: Option<String>,
    protocol: Option<String>,
    database: Option<String>,
}

fn device(p: &mut Parser<'_>) -> PResult<DeviceDecl> {
    let start = p.pos;
    let (name, _) = p.expect_ident("a device name")?;
    let mut props = Props::default();
    p.block(|p| property(p, &mut props))?;
    let span = p.span_from(start);

    let location = props.location.unwrap_or_default();
    if location.is_empty() {
        p.error("MissingLocation", format!("device `{name}` needs a non-empty location"), span.clone());
    }
    let protocol = props.protocol.unwrap_or_default();
    if protocol.is_empty() {
        p.error("MissingProtocol", format!("device `{name}` needs a protocol"), span.clone());
    }
    let resources = props.resources.unwrap_or_default();
    if resources.is_empty() && props.platform.is_none() {
        p.error(
            "IdleDevice",
            format!("device `{name}` hosts no resources and declares no platform"),
            span.clone(),
        );
    }
    Ok(DeviceDecl {
        name,
        location,
        resources,
        platform: props.platform,
        protocol,
        database: props.database,
        span,
    })
}

fn property(p: &mut Parser<'_>, props: &mut Props) -> PResult<()> {
    let key_tok = p.peek().clone();
    let key = match key_tok.text.as_str() {
        "location" | "resources" | "protocol" | "database" => {
            p.bump();
            key_tok.text.clone()
        }
        "language" => {
            p.bump();
            p.expect("-")?;
            p.expect("platform")?;
            "language-platform".to_string()
        }
        _ => return Err(p.unexpected("location, resources, language-platform, protocol or database")),
    };
    p.expect(":")?;
    let duplicate = match key.as_str() {
        "location" => {
            let (loc, _) = p.expect_string("a quoted location path")?;
            props.location.replace(loc).is_some()
        }
        "resources" => {
            let mut names = Vec::new();
            if !p.at(";") {
                loop {
                    let (n, span) = p.expect_ident("a resource or service name")?;
                    names.push(NameRef { name: n, span });
                    if !p.eat(",") {
                        break;
                    }
                }
            }
            props.resources.replace(names).is_some()
        }
        "language-platform" => {
            let (v, _) = p.expect_ident("a platform name")?;
            props.platform.replace(v).is_some()
        }
        "protocol" => {
            let (v, _) = p.expect_ident("a protocol name")?;
            props.protocol.replace(v).is_some()
        }
        _ => {
            let (v, _) = p.expect_ident("a database name")?;
            props.database.replace(v).is_some()
        }
    };
    p.expect(";")?;
    if duplicate {
        p.error("DuplicateProperty", format!("`{key}` given more than once"), key_tok.span);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hvac_devices() {
        let (spec, diags) = parse_deployment(include_str!("../../corpus/hvac/app.deploy.mydsl"), "d");
        assert!(diags.is_empty(), "{diags:?}");
        let spec = spec.unwrap();
        let badge = spec.device("BadgeReaderMgmtDevice").unwrap();
        assert_eq!(badge.location, "home/room#1");
        assert_eq!(badge.resources.iter().map(|r| r.name.as_str()).collect::<Vec<_>>(), ["BadgeReader"]);
        assert_eq!(badge.platform.as_deref(), Some("NodeJS"));
        assert_eq!(badge.protocol, "mqtt");
        assert_eq!(spec.device("DatabaseSrvDevice").unwrap().database.as_deref(), Some("MySQL"));
    }

    #[test]
    fn duplicate_device() {
        let text = r#"devices {
  A { location: "x"; language-platform: JavaSE; protocol: mqtt; }
  A { location: "y"; language-platform: JavaSE; protocol: mqtt; }
}"#;
        let (spec, diags) = parse_deployment(text, "d");
        assert!(spec.is_none());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, "DuplicateDevice");
        assert_eq!(diags[0].span.line, 3);
    }

    #[test]
    fn required_properties() {
        let (_, diags) = parse_deployment("devices { A { resources: ; } }", "d");
        let codes: Vec<_> = diags.iter().map(|d| d.code).collect();
        assert_eq!(codes, ["MissingLocation", "MissingProtocol", "IdleDevice"]);
    }
}

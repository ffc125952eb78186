use super::{check_unique, PResult, Parsed, Parser};
use crate::diag::Diagnostic;
use crate::model::{
    AccessKey, ActionDecl, ActuatorDecl, DomainSpec, Param, SensorDecl, SensorKind, StorageDecl,
    TagDecl,
};

/// Parses a vocabulary (`.vocab.mydsl`) file.
///
/// ```text
/// resources {
///   structs { TempStruct { tempValue: double; } }
///   periodicSensors {
///     TemperatureSensor {
///       generate tempMeasurement: TempStruct;
///       sample period 1 for 360;
///     }
///   }
/// }
/// ```
pub fn parse_domain(text: &str, file: &str) -> Parsed<DomainSpec> {
    let mut p = Parser::new(text, file);
    let mut spec = DomainSpec::default();
    if p.expect("resources").is_ok() {
        let _ = p.block(|p| section(p, &mut spec));
        p.finish();
    }
    check_domain(&spec, &mut p.diags);
    p.into_result(spec)
}

fn section(p: &mut Parser<'_>, spec: &mut DomainSpec) -> PResult<()> {
    let head = p.peek().text.clone();
    match head.as_str() {
        "structs" => p.structs_section(&mut spec.records),
        "tags" => {
            p.bump();
            p.block(|p| {
                let t = tag(p)?;
                spec.tags.push(t);
                Ok(())
            })
        }
        "periodicSensors" | "eventDrivenSensors" | "requestBasedSensors" => {
            p.bump();
            p.block(|p| {
                let s = sensor(p, &head)?;
                spec.sensors.push(s);
                Ok(())
            })
        }
        "actuators" => {
            p.bump();
            p.block(|p| {
                let a = actuator(p)?;
                spec.actuators.push(a);
                Ok(())
            })
        }
        "storages" => {
            p.bump();
            p.block(|p| {
                let s = storage(p)?;
                spec.storages.push(s);
                Ok(())
            })
        }
        _ => Err(p.unexpected(
            "a section (structs, tags, periodicSensors, eventDrivenSensors, requestBasedSensors, actuators, storages)",
        )),
    }
}

fn tag(p: &mut Parser<'_>) -> PResult<TagDecl> {
    let start = p.pos;
    let (name, _) = p.expect_ident("a tag name")?;
    let mut generates = Vec::new();
    p.block(|p| {
        let g = p.event_decl("generate")?;
        p.expect(";")?;
        generates.push(g);
        Ok(())
    })?;
    let span = p.span_from(start);
    if generates.is_empty() {
        p.error("EmptyTag", format!("tag `{name}` generates no events"), span.clone());
    }
    Ok(TagDecl {
        name,
        generates,
        span,
    })
}

/// `accessed-by name: type`
fn accessed_by(p: &mut Parser<'_>) -> PResult<AccessKey> {
    p.expect("accessed")?;
    p.expect("-")?;
    p.expect("by")?;
    let (name, _) = p.expect_name("an access key name")?;
    p.expect(":")?;
    let ty = p.expect_type()?;
    Ok(AccessKey { name, ty })
}

fn sensor(p: &mut Parser<'_>, section: &str) -> PResult<SensorDecl> {
    let start = p.pos;
    let (name, _) = p.expect_ident("a sensor name")?;
    p.expect("{")?;
    let generates = p.event_decl("generate")?;
    let kind = match section {
        "periodicSensors" => {
            p.expect(";")?;
            p.expect("sample")?;
            p.expect("period")?;
            let period = seconds_to_ms(p, "sample period")?;
            p.expect("for")?;
            let duration = seconds_to_ms(p, "duration")?;
            p.expect(";")?;
            SensorKind::Periodic {
                sample_period_ms: period,
                duration_ms: duration,
            }
        }
        "eventDrivenSensors" => {
            p.expect(";")?;
            p.expect("onCondition")?;
            let condition = p.expr()?;
            p.expect(";")?;
            SensorKind::EventDriven { condition }
        }
        _ => {
            let access_key = accessed_by(p)?;
            p.expect(";")?;
            SensorKind::RequestBased { access_key }
        }
    };
    p.expect("}")?;
    Ok(SensorDecl {
        name,
        kind,
        generates,
        span: p.span_from(start),
    })
}

/// Reads a positive number of seconds and converts it to whole milliseconds.
fn seconds_to_ms(p: &mut Parser<'_>, what: &str) -> PResult<u64> {
    let tok = p.peek().clone();
    if tok.kind != super::lexer::TokenKind::Number {
        return Err(p.unexpected(&format!("a {what} in seconds")));
    }
    p.bump();
    let secs: f64 = tok.text.parse().unwrap_or(f64::NAN);
    let ms = secs * 1000.0;
    if !(ms.is_finite() && ms >= 1.0 && ms <= u64::MAX as f64 / 2.0 && (ms - ms.round()).abs() < 1e-6) {
        p.error(
            "InvalidPeriod",
            format!("{what} must be a positive number of seconds with millisecond resolution, got `{}`", tok.text),
            tok.span,
        );
        return Err(super::Bail);
    }
    Ok(ms.round() as u64)
}

fn actuator(p: &mut Parser<'_>) -> PResult<ActuatorDecl> {
    let start = p.pos;
    let (name, _) = p.expect_ident("an actuator name")?;
    let mut actions = Vec::new();
    p.block(|p| {
        let astart = p.pos;
        p.expect("action")?;
        let (aname, _) = p.expect_ident("an action name")?;
        p.expect("(")?;
        let mut params = Vec::new();
        if !p.at(")") {
            loop {
                let (pname, _) = p.expect_name("a parameter name")?;
                p.expect(":")?;
                let ty = p.expect_type()?;
                params.push(Param { name: pname, ty });
                if !p.eat(",") {
                    break;
                }
            }
        }
        p.expect(")")?;
        p.expect(";")?;
        actions.push(ActionDecl {
            name: aname,
            params,
            span: p.span_from(astart),
        });
        Ok(())
    })?;
    Ok(ActuatorDecl {
        name,
        actions,
        span: p.span_from(start),
    })
}

fn storage(p: &mut Parser<'_>) -> PResult<StorageDecl> {
    let start = p.pos;
    let (name, _) = p.expect_ident("a storage name")?;
    p.expect("{")?;
    let generates = p.event_decl("generate")?;
    let access_key = accessed_by(p)?;
    p.expect(";")?;
    p.expect("}")?;
    Ok(StorageDecl {
        name,
        generates,
        access_key,
        span: p.span_from(start),
    })
}

/// Invariants local to one vocabulary file.
fn check_domain(spec: &DomainSpec, diags: &mut Vec<Diagnostic>) {
    check_unique(
        diags,
        "DuplicateName",
        "record type",
        spec.records.iter().map(|r| (r.name.as_str(), &r.span)),
    );
    let resources = spec
        .tags
        .iter()
        .map(|t| (t.name.as_str(), &t.span))
        .chain(spec.sensors.iter().map(|s| (s.name.as_str(), &s.span)))
        .chain(spec.actuators.iter().map(|a| (a.name.as_str(), &a.span)))
        .chain(spec.storages.iter().map(|s| (s.name.as_str(), &s.span)));
    check_unique(diags, "DuplicateName", "resource", resources);

    for a in &spec.actuators {
        check_unique(
            diags,
            "DuplicateAction",
            &format!("action of `{}`", a.name),
            a.actions.iter().map(|x| (x.name.as_str(), &x.span)),
        );
        for action in &a.actions {
            check_unique(
                diags,
                "DuplicateParam",
                &format!("parameter of `{}.{}`", a.name, action.name),
                action.params.iter().map(|x| (x.name.as_str(), &action.span)),
            );
        }
    }

    let events = spec
        .tags
        .iter()
        .flat_map(|t| t.generates.iter())
        .chain(spec.sensors.iter().map(|s| &s.generates))
        .chain(spec.storages.iter().map(|s| &s.generates));
    for ev in events {
        if spec.record(&ev.payload).is_none() {
            diags.push(Diagnostic::error(
                "UnknownRecord",
                format!("record type `{}` is not declared in structs", ev.payload),
                ev.span.clone(),
            ));
        }
    }
}

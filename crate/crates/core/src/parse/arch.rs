use super::lexer::TokenKind;
use super::{check_unique, Bail, PResult, Parsed, Parser};
use crate::diag::Diagnostic;
use crate::model::{
    AggregateOp, ArchitectureSpec, ArgBinding, CommandDecl, Compute, Consume, Expr, ExprKind,
    FieldBase, RequestDecl, Scope, ServiceDecl, ServiceKind,
};

/// Parses an architecture (`.arch.mydsl`) file.
pub fn parse_architecture(text: &str, file: &str) -> Parsed<ArchitectureSpec> {
    let mut p = Parser::new(text, file);
    let mut spec = ArchitectureSpec::default();
    if p.expect("computationalServices").is_ok() {
        let _ = p.block(|p| {
            let s = service(p)?;
            spec.services.push(s);
            Ok(())
        });
        p.finish();
    }
    check_architecture(&spec, &mut p.diags);
    p.into_result(spec)
}

fn service(p: &mut Parser<'_>) -> PResult<ServiceDecl> {
    let start = p.pos;
    let kind = if p.eat("Common") {
        ServiceKind::Common
    } else if p.eat("Custom") {
        ServiceKind::Custom
    } else {
        return Err(p.unexpected("`Common` or `Custom`"));
    };
    let (name, _) = p.expect_ident("a service name")?;
    let mut decl = ServiceDecl {
        name,
        kind,
        consumes: Vec::new(),
        compute: None,
        requests: Vec::new(),
        generates: Vec::new(),
        commands: Vec::new(),
        span: p.span_from(start),
    };
    p.block(|p| clause(p, &mut decl))?;
    decl.span = p.span_from(start);
    Ok(decl)
}

fn clause(p: &mut Parser<'_>, decl: &mut ServiceDecl) -> PResult<()> {
    let start = p.pos;
    let head = p.peek().text.clone();
    match head.as_str() {
        "consume" => {
            p.bump();
            let (event, _) = p.expect_name("an event name")?;
            let scope = if p.eat("from") {
                p.expect("global")?;
                Scope::Global
            } else {
                Scope::SameLocation
            };
            p.expect(";")?;
            decl.consumes.push(Consume {
                event,
                scope,
                span: p.span_from(start),
            });
        }
        "COMPUTE" => {
            p.bump();
            let op_tok = p.peek().clone();
            let op = match AggregateOp::from_keyword(&op_tok.text) {
                Some(op) if op_tok.kind == TokenKind::Ident => op,
                _ => return Err(p.unexpected("AVG_BY_SAMPLE, SUM_BY_SAMPLE or COUNT_BY_SAMPLE")),
            };
            p.bump();
            p.expect("(")?;
            let n_tok = p.peek().clone();
            let window = match (n_tok.kind, n_tok.text.parse::<u32>()) {
                (TokenKind::Number, Ok(n)) if n > 0 => n,
                (TokenKind::Number, _) => {
                    p.bump();
                    p.error(
                        "InvalidWindow",
                        format!("window size must be a positive integer, got `{}`", n_tok.text),
                        n_tok.span,
                    );
                    return Err(Bail);
                }
                _ => return Err(p.unexpected("a window size")),
            };
            p.bump();
            p.expect(")")?;
            p.expect("on")?;
            let (field, _) = p.expect_name("a field name")?;
            p.expect(";")?;
            let span = p.span_from(start);
            if decl.compute.is_some() {
                p.error("DuplicateCompute", format!("service `{}` has more than one COMPUTE clause", decl.name), span.clone());
            }
            decl.compute = Some(Compute {
                op,
                window,
                field,
                span,
            });
        }
        "request" => {
            p.bump();
            let (response, _) = p.expect_name("a response name")?;
            p.expect("to")?;
            let (target, _) = p.expect_ident("a request target")?;
            p.expect(";")?;
            decl.requests.push(RequestDecl {
                response,
                target,
                span: p.span_from(start),
            });
        }
        "generate" => {
            let ev = p.event_decl("generate")?;
            p.expect(";")?;
            decl.generates.push(ev);
        }
        "command" => {
            p.bump();
            let (action, _) = p.expect_ident("an action name")?;
            p.expect("(")?;
            let mut args = Vec::new();
            if !p.at(")") {
                loop {
                    let (param, pspan) = p.expect_name("a parameter name")?;
                    let value = if p.eat("=") {
                        p.expr()?
                    } else {
                        // `command SetTemp(setTemp)` binds the field of the same name.
                        Expr::new(
                            ExprKind::Field {
                                base: FieldBase::Bare,
                                name: param.clone(),
                            },
                            pspan,
                        )
                    };
                    args.push(ArgBinding { param, value });
                    if !p.eat(",") {
                        break;
                    }
                }
            }
            p.expect(")")?;
            p.expect("to")?;
            let (actuator, _) = p.expect_ident("an actuator name")?;
            p.expect(";")?;
            decl.commands.push(CommandDecl {
                action,
                actuator,
                args,
                span: p.span_from(start),
            });
        }
        _ => return Err(p.unexpected("consume, COMPUTE, request, generate or command")),
    }
    Ok(())
}

fn check_architecture(spec: &ArchitectureSpec, diags: &mut Vec<Diagnostic>) {
    check_unique(
        diags,
        "DuplicateService",
        "service",
        spec.services.iter().map(|s| (s.name.as_str(), &s.span)),
    );
    for s in &spec.services {
        match s.kind {
            ServiceKind::Common => {
                if s.compute.is_none() {
                    diags.push(Diagnostic::error(
                        "MissingCompute",
                        format!("Common service `{}` needs a COMPUTE clause", s.name),
                        s.span.clone(),
                    ));
                }
                if s.consumes.len() != 1 || s.generates.len() != 1 {
                    diags.push(Diagnostic::error(
                        "CommonShape",
                        format!(
                            "Common service `{}` must consume exactly one event and generate exactly one event",
                            s.name
                        ),
                        s.span.clone(),
                    ));
                }
                if !s.requests.is_empty() || !s.commands.is_empty() {
                    diags.push(Diagnostic::error(
                        "CommonShape",
                        format!("Common service `{}` cannot issue requests or commands", s.name),
                        s.span.clone(),
                    ));
                }
            }
            ServiceKind::Custom => {
                if let Some(c) = &s.compute {
                    diags.push(Diagnostic::error(
                        "UnexpectedCompute",
                        format!("Custom service `{}` cannot have a COMPUTE clause", s.name),
                        c.span.clone(),
                    ));
                }
            }
        }
        check_unique(
            diags,
            "DuplicateConsume",
            &format!("consumed event of `{}`", s.name),
            s.consumes.iter().map(|c| (c.event.as_str(), &c.span)),
        );
        check_unique(
            diags,
            "DuplicateGenerate",
            &format!("generated event of `{}`", s.name),
            s.generates.iter().map(|g| (g.event.as_str(), &g.span)),
        );
        for c in &s.consumes {
            if s.generated(&c.event).is_some() {
                diags.push(Diagnostic::error(
                    "SelfLoop",
                    format!("service `{}` consumes `{}`, which it also generates", s.name, c.event),
                    c.span.clone(),
                ));
            }
        }
        for cmd in &s.commands {
            check_unique(
                diags,
                "DuplicateParam",
                &format!("argument of `{}`", cmd.action),
                cmd.args.iter().map(|a| (a.param.as_str(), &cmd.span)),
            );
        }
    }
}

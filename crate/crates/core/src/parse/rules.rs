use super::{check_unique, PResult, Parsed, Parser};
use crate::model::{
    ActionKind, FieldAssign, LogicRuleSet, Rule, RuleAction, ServiceRules, SourceSpan, Trigger,
};

/// Parses a logic-rule (`.rules`) file.
///
/// ```text
/// service Proximity {
///   on badgeDetected -> request ProfileDB(event.badgeID);
///   on response profile -> emit tempPref(tempValue = response.preferredTemp, unitOfMeasurement = "C");
/// }
/// ```
pub fn parse_logic_rules(text: &str, file: &str) -> Parsed<LogicRuleSet> {
    let mut p = Parser::new(text, file);
    let mut set = LogicRuleSet::default();
    while !p.at_eof() {
        let before = p.pos;
        match service_rules(&mut p) {
            Ok(s) => set.services.push(s),
            Err(_) => {
                if p.at_eof() {
                    break;
                }
                // Skip to the next `service` keyword.
                if p.pos == before {
                    p.bump();
                }
                while !p.at_eof() && !p.at("service") {
                    p.bump();
                }
            }
        }
    }
    check_unique(
        &mut p.diags,
        "DuplicateService",
        "rule block for service",
        set.services.iter().map(|s| (s.service.as_str(), &s.span)),
    );
    p.into_result(set)
}

fn service_rules(p: &mut Parser<'_>) -> PResult<ServiceRules> {
    let start = p.pos;
    p.expect("service")?;
    let (service, _) = p.expect_ident("a service name")?;
    let mut rules = Vec::new();
    p.block(|p| {
        let r = rule(p)?;
        rules.push(r);
        Ok(())
    })?;
    Ok(ServiceRules {
        service,
        rules,
        span: p.span_from(start),
    })
}

fn rule(p: &mut Parser<'_>) -> PResult<Rule> {
    let start = p.pos;
    p.expect("on")?;
    let trigger = if p.eat("response") {
        Trigger::OnResponse(p.expect_name("a response name")?.0)
    } else {
        Trigger::OnEvent(p.expect_name("an event name")?.0)
    };
    let guard = if p.eat("when") { Some(p.expr()?) } else { None };
    p.expect("->")?;
    let mut actions = Vec::new();
    if p.at("{") {
        p.block(|p| {
            let a = action(p)?;
            p.expect(";")?;
            actions.push(a);
            Ok(())
        })?;
    } else {
        actions.push(action(p)?);
        p.expect(";")?;
    }
    let span = p.span_from(start);
    if actions.is_empty() {
        p.error("EmptyRule", "rule has no actions", span.clone());
    }
    Ok(Rule {
        trigger,
        guard,
        actions,
        span,
    })
}

fn action(p: &mut Parser<'_>) -> PResult<RuleAction> {
    let start = p.pos;
    let head = p.peek().text.clone();
    let kind = match head.as_str() {
        "emit" => {
            p.bump();
            let (event, _) = p.expect_name("an event name")?;
            let fields = assigns(p)?;
            ActionKind::Emit { event, fields }
        }
        "command" => {
            p.bump();
            let (actuator, _) = p.expect_ident("an actuator name")?;
            p.expect(".")?;
            let (action, _) = p.expect_ident("an action name")?;
            let args = assigns(p)?;
            ActionKind::Command {
                actuator,
                action,
                args,
            }
        }
        "request" => {
            p.bump();
            let (target, _) = p.expect_ident("a storage or sensor name")?;
            p.expect("(")?;
            let key = p.expr()?;
            p.expect(")")?;
            ActionKind::Request { target, key }
        }
        "notify" => {
            p.bump();
            let (interactor, _) = p.expect_ident("an interactor name")?;
            let fields = assigns(p)?;
            ActionKind::Notify { interactor, fields }
        }
        "set" => {
            p.bump();
            let (field, _) = p.expect_name("a state field name")?;
            p.expect("=")?;
            let value = p.expr()?;
            ActionKind::SetState { field, value }
        }
        _ => return Err(p.unexpected("emit, command, request, notify or set")),
    };
    Ok(RuleAction {
        kind,
        span: p.span_from(start),
    })
}

/// `( name = expr, ... )`
fn assigns(p: &mut Parser<'_>) -> PResult<Vec<FieldAssign>> {
    p.expect("(")?;
    let mut out: Vec<(FieldAssign, SourceSpan)> = Vec::new();
    if !p.at(")") {
        loop {
            let (field, span) = p.expect_name("a field name")?;
            p.expect("=")?;
            let value = p.expr()?;
            out.push((FieldAssign { field, value }, span));
            if !p.eat(",") {
                break;
            }
        }
    }
    p.expect(")")?;
    check_unique(
        &mut p.diags,
        "DuplicateField",
        "assigned field",
        out.iter().map(|(a, s)| (a.field.as_str(), s)),
    );
    Ok(out.into_iter().map(|(a, _)| a).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BinaryOp, Expr, ExprKind, FieldBase, Literal};

    fn one_action(text: &str) -> ActionKind {
        let src = format!("service S {{ {text} }}");
        let (set, diags) = parse_logic_rules(&src, "r");
        assert!(diags.is_empty(), "{diags:?}");
        set.unwrap().services[0].rules[0].actions[0].kind.clone()
    }

    #[test]
    fn request_action() {
        let kind = one_action("on badgeDetected -> request ProfileDB(event.badgeID);");
        assert_eq!(
            kind,
            ActionKind::Request {
                target: "ProfileDB".into(),
                key: Expr::field(FieldBase::Event, "badgeID"),
            }
        );
    }

    #[test]
    fn command_action() {
        let kind = one_action("on tempPref -> command Heater.SetTemp(setTemp = event.tempValue);");
        assert_eq!(
            kind,
            ActionKind::Command {
                actuator: "Heater".into(),
                action: "SetTemp".into(),
                args: vec![FieldAssign {
                    field: "setTemp".into(),
                    value: Expr::field(FieldBase::Event, "tempValue"),
                }],
            }
        );
    }

    #[test]
    fn guard_is_comparison() {
        let src = "service S { on smokeMeasurement when event.smokeValue > 650 -> set s = 1; }";
        let (set, _) = parse_logic_rules(src, "r");
        let guard = set.unwrap().services[0].rules[0].guard.clone().unwrap();
        assert_eq!(
            guard,
            Expr::binary(
                BinaryOp::Gt,
                Expr::field(FieldBase::Event, "smokeValue"),
                Expr::literal(Literal::Long(650))
            )
        );
    }

    #[test]
    fn block_and_response_trigger() {
        let src = "service S { on response profile -> { set a = response.x; notify App(v = 1.5); } }";
        let (set, diags) = parse_logic_rules(src, "r");
        assert!(diags.is_empty(), "{diags:?}");
        let rule = &set.unwrap().services[0].rules[0];
        assert_eq!(rule.trigger, Trigger::OnResponse("profile".into()));
        assert_eq!(rule.actions.len(), 2);
        assert!(matches!(&rule.actions[1].kind, ActionKind::Notify { fields, .. }
            if matches!(fields[0].value.kind, ExprKind::Literal(Literal::Double(v)) if v == 1.5)));
    }

    #[test]
    fn recovers_across_services() {
        let src = "service A { on x -> bogus; }\nservice B { on y -> set z = ; }\nservice C { on w -> set q = 1; }";
        let (set, diags) = parse_logic_rules(src, "r");
        assert!(set.is_none());
        assert_eq!(diags.len(), 2, "{diags:?}");
        assert_eq!((diags[0].span.line, diags[1].span.line), (1, 2));
    }

    #[test]
    fn corpus_rules_parse() {
        for text in [
            include_str!("../../corpus/hvac/app.rules"),
            include_str!("../../corpus/fire/app.rules"),
            include_str!("../../corpus/smarthome/app.rules"),
        ] {
            let (set, diags) = parse_logic_rules(text, "r");
            assert!(diags.is_empty(), "{diags:?}");
            assert!(!set.unwrap().services.is_empty());
        }
    }
}

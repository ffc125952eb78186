use super::{check_unique, PResult, Parsed, Parser};
use crate::model::{InteractorDecl, InteractorKind, UserInteractionSpec};

/// Parses a user-interaction (`.ui.mydsl`) file.
pub fn parse_userinteraction(text: &str, file: &str) -> Parsed<UserInteractionSpec> {
    let mut p = Parser::new(text, file);
    let mut spec = UserInteractionSpec::default();
    if p.expect("userInteractions").is_ok() {
        let _ = p.block(|p| {
            if p.at("structs") {
                p.structs_section(&mut spec.records)
            } else if p.eat("resources") {
                p.block(|p| {
                    let i = interactor(p)?;
                    spec.interactors.push(i);
                    Ok(())
                })
            } else {
                Err(p.unexpected("`structs` or `resources`"))
            }
        });
        p.finish();
    }
    check_unique(
        &mut p.diags,
        "DuplicateName",
        "record type",
        spec.records.iter().map(|r| (r.name.as_str(), &r.span)),
    );
    check_unique(
        &mut p.diags,
        "DuplicateName",
        "interactor",
        spec.interactors.iter().map(|i| (i.name.as_str(), &i.span)),
    );
    p.into_result(spec)
}

fn interactor(p: &mut Parser<'_>) -> PResult<InteractorDecl> {
    let start = p.pos;
    let (name, _) = p.expect_ident("an interactor name")?;
    p.expect("{")?;
    let payload = p.event_decl("notify")?;
    p.expect(";")?;
    p.expect("}")?;
    Ok(InteractorDecl {
        name,
        kind: InteractorKind::Notify,
        payload,
        span: p.span_from(start),
    })
}

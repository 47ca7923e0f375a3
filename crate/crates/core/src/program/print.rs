use super::parse::tokenize;
use super::{parse, Expression, ParseError, Program};

/// Canonical text: no spaces around `(` or `=`, `, ` between arguments,
/// single-quoted strings.
pub fn print(program: &Program) -> String {
    print_expression(&program.expr)
}

pub fn print_expression(expr: &Expression) -> String {
    let mut out = String::new();
    write_expr(expr, &mut out);
    out
}

fn write_expr(expr: &Expression, out: &mut String) {
    match expr {
        Expression::Call {
            name,
            type_arg,
            args,
        } => {
            out.push_str(name);
            if let Some(t) = type_arg {
                out.push('[');
                out.push_str(&t.to_string());
                out.push(']');
            }
            out.push('(');
            for (i, arg) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                if let Some(k) = &arg.keyword {
                    out.push_str(k);
                    out.push('=');
                }
                write_expr(&arg.value, out);
            }
            out.push(')');
        }
        Expression::Str(s) => out.push_str(&quote(s)),
        Expression::Num(n) => out.push_str(&format_number(*n)),
        Expression::Enum(name) => out.push_str(name),
        Expression::List(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(item, out);
            }
            out.push(']');
        }
    }
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        if c == '\'' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
    out
}

pub(crate) fn format_number(n: f64) -> String {
    // f64's Display is the shortest representation that reparses exactly.
    format!("{n}")
}

/// Token sequence of the canonical printed form.
pub fn linearize(program: &Program) -> Vec<String> {
    tokenize(&print(program)).expect("canonical text always lexes")
}

pub fn delinearize<S: AsRef<str>>(tokens: &[S]) -> Result<Program, ParseError> {
    let text = tokens
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<_>>()
        .join(" ");
    parse(&text)
}

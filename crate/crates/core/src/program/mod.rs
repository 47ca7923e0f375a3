//! The per-turn annotation language: a small call-expression syntax.
//!
//! ```text
//! expr    := NAME [ '[' type ']' ] '(' [arglist] ')' | STRING | NUMBER | NAME | '[' [expr (',' expr)*] ']'
//! type    := NAME [ '[' type ']' ]
//! arglist := arg (',' arg)*
//! arg     := [NAME '='] expr
//! ```
//!
//! Operator names (`+`, `-`, `*`, `/`) are accepted wherever a call name is.
//! Bracketed lists carry keyword paths such as `RoleConstraint([date, weekday])`.

mod extend;
mod parse;
mod print;

use std::fmt;

pub use extend::{extend_graph, extend_graph_at, ExtendError};
pub use parse::{parse, parse_expression, ParseError};
pub use print::{delinearize, linearize, print, print_expression};

/// A single program predicted for one user turn.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub expr: Expression,
}

impl Program {
    pub fn new(expr: Expression) -> Self {
        Program { expr }
    }

    /// Number of graph nodes `extend_graph` creates for this program.
    pub fn node_count(&self) -> usize {
        self.expr.node_count()
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(self))
    }
}

impl std::str::FromStr for Program {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Call {
        name: String,
        type_arg: Option<TypeExpr>,
        args: Vec<Arg>,
    },
    Str(String),
    Num(f64),
    /// A bare identifier: an enum constant or a keyword-path segment.
    Enum(String),
    List(Vec<Expression>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arg {
    pub keyword: Option<String>,
    pub value: Expression,
}

impl Arg {
    pub fn positional(value: Expression) -> Self {
        Arg {
            keyword: None,
            value,
        }
    }

    pub fn keyword(keyword: impl Into<String>, value: Expression) -> Self {
        Arg {
            keyword: Some(keyword.into()),
            value,
        }
    }
}

/// A type argument as written, e.g. `Event` or `Constraint[DateTimeSpec]`.
/// Aliases are kept verbatim; [`crate::types::TypeTag::from_expr`] expands them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypeExpr {
    pub name: String,
    pub arg: Option<Box<TypeExpr>>,
}

impl TypeExpr {
    pub fn named(name: impl Into<String>) -> Self {
        TypeExpr {
            name: name.into(),
            arg: None,
        }
    }

    pub fn applied(name: impl Into<String>, arg: TypeExpr) -> Self {
        TypeExpr {
            name: name.into(),
            arg: Some(Box::new(arg)),
        }
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if let Some(arg) = &self.arg {
            write!(f, "[{arg}]")?;
        }
        Ok(())
    }
}

impl Expression {
    pub fn call(name: impl Into<String>, args: Vec<Arg>) -> Self {
        Expression::Call {
            name: name.into(),
            type_arg: None,
            args,
        }
    }

    pub fn typed_call(name: impl Into<String>, type_arg: TypeExpr, args: Vec<Arg>) -> Self {
        Expression::Call {
            name: name.into(),
            type_arg: Some(type_arg),
            args,
        }
    }

    pub fn string(s: impl Into<String>) -> Self {
        Expression::Str(s.into())
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expression::Call { args, .. } => {
                1 + args.iter().map(|a| a.value.node_count()).sum::<usize>()
            }
            Expression::List(items) => 1 + items.iter().map(Expression::node_count).sum::<usize>(),
            _ => 1,
        }
    }

    /// True if any call in the expression is named `name`.
    pub fn mentions(&self, name: &str) -> bool {
        match self {
            Expression::Call {
                name: n, args: a, ..
            } => n == name || a.iter().any(|arg| arg.value.mentions(name)),
            Expression::List(items) => items.iter().any(|e| e.mentions(name)),
            _ => false,
        }
    }
}

/// Call heads that start with an uppercase letter, or carry a type argument,
/// become constructor nodes in the graph.
pub fn is_constructor_name(name: &str, has_type_arg: bool) -> bool {
    has_type_arg || name.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub(crate) const OPERATORS: [&str; 4] = ["+", "-", "*", "/"];

//! Type tags for values and the fixed alias / enum tables of the annotation
//! language.

use std::fmt;

use crate::program::TypeExpr;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeTag {
    Named(String),
    Constraint(Box<TypeTag>),
    List(Box<TypeTag>),
    /// Unconstrained parameter or unknown element type.
    Any,
}

impl TypeTag {
    pub fn named(name: &str) -> Self {
        TypeTag::Named(name.to_string())
    }

    pub fn constraint(inner: TypeTag) -> Self {
        TypeTag::Constraint(Box::new(inner))
    }

    pub fn list(inner: TypeTag) -> Self {
        TypeTag::List(Box::new(inner))
    }

    /// Resolves a written type, expanding `EventSpec`-style aliases.
    pub fn from_expr(expr: &TypeExpr) -> TypeTag {
        match (expr.name.as_str(), &expr.arg) {
            ("Constraint", Some(inner)) => TypeTag::constraint(TypeTag::from_expr(inner)),
            ("List", Some(inner)) => TypeTag::list(TypeTag::from_expr(inner)),
            ("Any", None) => TypeTag::Any,
            (name, None) => match alias(name) {
                Some(a) => TypeTag::constraint(TypeTag::named(a.base)),
                None => TypeTag::named(name),
            },
            (name, Some(inner)) => {
                // Unknown parameterized heads keep their argument in the name.
                TypeTag::Named(format!("{name}[{}]", TypeTag::from_expr(inner)))
            }
        }
    }

    /// Written form using canonical (alias-free) names.
    pub fn to_expr(&self) -> TypeExpr {
        match self {
            TypeTag::Named(n) => TypeExpr::named(n.clone()),
            TypeTag::Constraint(inner) => TypeExpr::applied("Constraint", inner.to_expr()),
            TypeTag::List(inner) => TypeExpr::applied("List", inner.to_expr()),
            TypeTag::Any => TypeExpr::named("Any"),
        }
    }

    /// Structural conformance of an actual type to an expected one.
    pub fn conforms_to(&self, expected: &TypeTag) -> bool {
        match (self, expected) {
            (_, TypeTag::Any) => true,
            (TypeTag::Constraint(a), TypeTag::Constraint(b)) => a.conforms_to(b),
            (TypeTag::List(a), TypeTag::List(b)) => matches!(**a, TypeTag::Any) || a.conforms_to(b),
            (a, b) => a == b,
        }
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeTag::Named(n) => f.write_str(n),
            TypeTag::Constraint(inner) => write!(f, "Constraint[{inner}]"),
            TypeTag::List(inner) => write!(f, "List[{inner}]"),
            TypeTag::Any => f.write_str("Any"),
        }
    }
}

/// A shorthand constructor name standing for `Constraint[base]`.
#[derive(Debug, Clone, Copy)]
pub struct Alias {
    pub name: &'static str,
    pub base: &'static str,
    /// Keyword renames applied when reading the constraint.
    pub renames: &'static [(&'static str, &'static str)],
}

const ALIASES: &[Alias] = &[
    Alias {
        name: "EventSpec",
        base: "Event",
        renames: &[],
    },
    Alias {
        name: "PersonSpec",
        base: "Person",
        renames: &[],
    },
    Alias {
        name: "DateTimeSpec",
        base: "DateTime",
        renames: &[],
    },
    Alias {
        name: "PlaceSpec",
        base: "Place",
        renames: &[],
    },
    Alias {
        name: "EventBuilder",
        base: "Event",
        renames: &[("subject", "name")],
    },
];

pub fn alias(name: &str) -> Option<&'static Alias> {
    ALIASES.iter().find(|a| a.name == name)
}

/// Which constraint-building form a constructor label denotes, if any.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintForm {
    /// `Constraint[T](...)` or an alias of it.
    Typed(TypeTag),
    /// `RoleConstraint(kw)` / `RoleConstraint([kw, kw])`.
    Role,
    AlwaysTrue,
}

pub fn constraint_form(name: &str, type_arg: Option<&TypeExpr>) -> Option<ConstraintForm> {
    match (name, type_arg) {
        ("Constraint", Some(t)) => Some(ConstraintForm::Typed(TypeTag::from_expr(t))),
        ("RoleConstraint", None) => Some(ConstraintForm::Role),
        ("AlwaysTrue", None) => Some(ConstraintForm::AlwaysTrue),
        (n, None) => alias(n).map(|a| ConstraintForm::Typed(TypeTag::named(a.base))),
        _ => None,
    }
}

/// Maps a keyword written in a constraint constructor to the field it constrains.
pub fn canonical_keyword<'a>(ctor: &str, keyword: &'a str) -> &'a str {
    if let Some(a) = alias(ctor) {
        for (from, to) in a.renames {
            if *from == keyword {
                return to;
            }
        }
    }
    keyword
}

pub const WEEKDAYS: [&str; 7] = [
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
];

pub const MONTHS: [&str; 12] = [
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
];

pub const MONTH_NAMES: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

/// Index of a weekday constant (0 = monday), accepting common abbreviations.
pub fn weekday_index(name: &str) -> Option<usize> {
    let lower = name.to_ascii_lowercase();
    let idx = match lower.as_str() {
        "mon" => 0,
        "tue" | "tues" => 1,
        "wed" => 2,
        "thu" | "thur" | "thurs" => 3,
        "fri" => 4,
        "sat" => 5,
        "sun" => 6,
        full => WEEKDAYS.iter().position(|w| *w == full)?,
    };
    Some(idx)
}

/// Index of a month constant (0 = january), accepting full names.
pub fn month_index(name: &str) -> Option<usize> {
    let lower = name.to_ascii_lowercase();
    if lower == "sept" {
        return Some(8);
    }
    MONTHS.iter().position(|m| *m == lower).or_else(|| {
        MONTH_NAMES
            .iter()
            .position(|m| m.to_ascii_lowercase() == lower)
    })
}

/// Type of a bare enum constant. Identifiers outside the calendar enums are symbols.
pub fn enum_type(name: &str) -> TypeTag {
    if weekday_index(name).is_some() {
        TypeTag::named("Weekday")
    } else if month_index(name).is_some() {
        TypeTag::named("Month")
    } else {
        TypeTag::named("Symbol")
    }
}

/// Canonical spelling used when comparing enum constants.
pub fn canonical_enum(name: &str) -> String {
    if let Some(i) = weekday_index(name) {
        WEEKDAYS[i].to_string()
    } else if let Some(i) = month_index(name) {
        MONTHS[i].to_string()
    } else {
        name.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aliases_expand_inside_type_arguments() {
        let t = TypeTag::from_expr(&TypeExpr::applied("Constraint", TypeExpr::named("DateTimeSpec")));
        assert_eq!(t, TypeTag::constraint(TypeTag::constraint(TypeTag::named("DateTime"))));
        assert_eq!(t.to_string(), "Constraint[Constraint[DateTime]]");
    }

    #[test]
    fn enum_tables() {
        assert_eq!(enum_type("thurs"), TypeTag::named("Weekday"));
        assert_eq!(enum_type("apr"), TypeTag::named("Month"));
        assert_eq!(enum_type("output"), TypeTag::named("Symbol"));
        assert_eq!(canonical_enum("thurs"), "thursday");
        assert_eq!(canonical_enum("February"), "feb");
    }

    #[test]
    fn conformance() {
        let c_any = TypeTag::constraint(TypeTag::Any);
        assert!(TypeTag::constraint(TypeTag::named("Event")).conforms_to(&c_any));
        assert!(!TypeTag::named("String").conforms_to(&TypeTag::named("DateTime")));
        assert!(TypeTag::list(TypeTag::Any).conforms_to(&TypeTag::list(TypeTag::named("Person"))));
    }
}

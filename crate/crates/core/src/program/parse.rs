use thiserror::Error;

use super::{Arg, Expression, Program, TypeExpr, OPERATORS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate keyword `{keyword}` at {line}:{column}")]
    DuplicateKeyword {
        keyword: String,
        line: usize,
        column: usize,
    },
    #[error("positional argument after keyword argument at {line}:{column}")]
    PositionalAfterKeyword { line: usize, column: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Op(String),
    Str(String),
    Num(f64),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Eq,
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

/// Splits source text on lexer token boundaries, each token rendered canonically.
pub(super) fn tokenize(text: &str) -> Result<Vec<String>, ParseError> {
    Ok(lex(text)?
        .iter()
        .filter(|s| s.tok != Tok::Eof)
        .map(|s| token_text(&s.tok))
        .collect())
}

fn token_text(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) | Tok::Op(s) => s.clone(),
        Tok::Str(s) => super::print::quote(s),
        Tok::Num(n) => super::print::format_number(*n),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
        Tok::LBrack => "[".into(),
        Tok::RBrack => "]".into(),
        Tok::Comma => ",".into(),
        Tok::Eq => "=".into(),
        Tok::Eof => String::new(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let mut push = |tok: Tok| {
            out.push(Spanned {
                tok,
                line: start_line,
                column: start_col,
            })
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        match c {
            '(' => push(Tok::LParen),
            ')' => push(Tok::RParen),
            '[' => push(Tok::LBrack),
            ']' => push(Tok::RBrack),
            ',' => push(Tok::Comma),
            '=' => push(Tok::Eq),
            '\'' => {
                let mut s = String::new();
                let mut j = i + 1;
                let mut closed = false;
                while j < chars.len() {
                    match chars[j] {
                        '\\' if j + 1 < chars.len() && matches!(chars[j + 1], '\'' | '\\') => {
                            s.push(chars[j + 1]);
                            j += 2;
                        }
                        '\'' => {
                            closed = true;
                            j += 1;
                            break;
                        }
                        '\n' => return Err(syntax(start_line, start_col, "newline in string")),
                        ch => {
                            s.push(ch);
                            j += 1;
                        }
                    }
                }
                if !closed {
                    return Err(syntax(start_line, start_col, "unterminated string"));
                }
                push(Tok::Str(s));
                col += j - i;
                i = j;
                continue;
            }
            c if c.is_ascii_digit()
                || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) =>
            {
                let mut j = i + 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                    j += 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                let lexeme: String = chars[i..j].iter().collect();
                let n: f64 = lexeme
                    .parse()
                    .map_err(|_| syntax(start_line, start_col, format!("bad number `{lexeme}`")))?;
                push(Tok::Num(n));
                col += j - i;
                i = j;
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i + 1;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                push(Tok::Ident(chars[i..j].iter().collect()));
                col += j - i;
                i = j;
                continue;
            }
            c if OPERATORS.contains(&c.to_string().as_str()) => push(Tok::Op(c.to_string())),
            other => {
                return Err(syntax(
                    start_line,
                    start_col,
                    format!("unexpected character `{other}`"),
                ))
            }
        }
        i += 1;
        col += 1;
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        let t = self.bump();
        if t.tok == want {
            Ok(())
        } else {
            Err(syntax(
                t.line,
                t.column,
                format!("expected {what}, found {}", describe(&t.tok)),
            ))
        }
    }

    fn expression(&mut self) -> Result<Expression, ParseError> {
        let t = self.bump();
        match t.tok {
            Tok::Str(s) => Ok(Expression::Str(s)),
            Tok::Num(n) => Ok(Expression::Num(n)),
            Tok::LBrack => {
                let mut items = Vec::new();
                if self.peek().tok != Tok::RBrack {
                    loop {
                        items.push(self.expression()?);
                        if self.peek().tok == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBrack, "`]`")?;
                Ok(Expression::List(items))
            }
            Tok::Op(op) => {
                if self.peek().tok != Tok::LParen {
                    let p = self.peek();
                    return Err(syntax(p.line, p.column, format!("operator `{op}` must be called")));
                }
                let args = self.arglist()?;
                Ok(Expression::Call {
                    name: op,
                    type_arg: None,
                    args,
                })
            }
            Tok::Ident(name) => {
                let type_arg = if self.peek().tok == Tok::LBrack {
                    self.bump();
                    let ty = self.type_expr()?;
                    self.expect(Tok::RBrack, "`]`")?;
                    Some(ty)
                } else {
                    None
                };
                if self.peek().tok == Tok::LParen {
                    let args = self.arglist()?;
                    Ok(Expression::Call {
                        name,
                        type_arg,
                        args,
                    })
                } else if type_arg.is_some() {
                    // `Constraint[DateTimeSpec]` written without parentheses.
                    Ok(Expression::Call {
                        name,
                        type_arg,
                        args: Vec::new(),
                    })
                } else {
                    Ok(Expression::Enum(name))
                }
            }
            other => Err(syntax(
                t.line,
                t.column,
                format!("expected expression, found {}", describe(&other)),
            )),
        }
    }

    fn type_expr(&mut self) -> Result<TypeExpr, ParseError> {
        let t = self.bump();
        let Tok::Ident(name) = t.tok else {
            return Err(syntax(t.line, t.column, "expected type name"));
        };
        if self.peek().tok == Tok::LBrack {
            self.bump();
            let inner = self.type_expr()?;
            self.expect(Tok::RBrack, "`]`")?;
            Ok(TypeExpr::applied(name, inner))
        } else {
            Ok(TypeExpr::named(name))
        }
    }

    fn arglist(&mut self) -> Result<Vec<Arg>, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args: Vec<Arg> = Vec::new();
        if self.peek().tok == Tok::RParen {
            self.bump();
            return Ok(args);
        }
        loop {
            let start = self.peek().clone();
            let keyword = match (&start.tok, self.peek_at(1)) {
                (Tok::Ident(k), Tok::Eq) => {
                    let k = k.clone();
                    self.bump();
                    self.bump();
                    Some(k)
                }
                _ => None,
            };
            match &keyword {
                Some(k) => {
                    if args.iter().any(|a| a.keyword.as_deref() == Some(k.as_str())) {
                        return Err(ParseError::DuplicateKeyword {
                            keyword: k.clone(),
                            line: start.line,
                            column: start.column,
                        });
                    }
                }
                None => {
                    if args.iter().any(|a| a.keyword.is_some()) {
                        return Err(ParseError::PositionalAfterKeyword {
                            line: start.line,
                            column: start.column,
                        });
                    }
                }
            }
            let value = self.expression()?;
            args.push(Arg { keyword, value });
            let t = self.bump();
            match t.tok {
                Tok::Comma => continue,
                Tok::RParen => break,
                other => {
                    return Err(syntax(
                        t.line,
                        t.column,
                        format!("expected `,` or `)`, found {}", describe(&other)),
                    ))
                }
            }
        }
        Ok(args)
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Eof => "end of input".to_string(),
        other => format!("`{}`", token_text(other)),
    }
}

/// Parses one expression spanning the whole input.
pub fn parse_expression(text: &str) -> Result<Expression, ParseError> {
    let mut parser = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let expr = parser.expression()?;
    let rest = parser.peek();
    if rest.tok != Tok::Eof {
        return Err(syntax(
            rest.line,
            rest.column,
            format!("trailing input starting at {}", describe(&rest.tok)),
        ));
    }
    Ok(expr)
}

pub fn parse(text: &str) -> Result<Program, ParseError> {
    parse_expression(text).map(Program::new)
}

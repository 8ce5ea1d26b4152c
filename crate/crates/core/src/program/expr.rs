//! Expression trees produced by the parser before lowering.

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Expr {
    Lit(String),
    Name(String),
    This,
    Super,
    Field(Box<Expr>, String),
    ClassLit(String),
    Call {
        recv: Option<Box<Expr>>,
        name: String,
        args: Vec<Expr>,
        line: u32,
    },
    New {
        ty: String,
        args: Vec<Expr>,
        line: u32,
    },
    NewArray {
        ty: String,
        dims: Vec<Option<Expr>>,
        init: Option<Vec<Expr>>,
    },
    ArrayInit(Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Unary(&'static str, Box<Expr>),
    /// `x++` / `--x` style updates; the bool is true for the prefix form.
    Update(&'static str, bool, Box<Expr>),
    Binary(&'static str, Box<Expr>, Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    Cast(String, Box<Expr>),
    InstanceOf(Box<Expr>, String),
    Assign(&'static str, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub(crate) fn is_call(&self) -> bool {
        matches!(self, Expr::Call { .. } | Expr::New { .. })
    }

    /// `a.b.c` as text when the expression is a plain dotted name.
    pub(crate) fn dotted_name(&self) -> Option<String> {
        match self {
            Expr::Name(n) => Some(n.clone()),
            Expr::Field(base, f) => base.dotted_name().map(|b| format!("{b}.{f}")),
            _ => None,
        }
    }

    /// Leftmost identifier of a dotted name.
    pub(crate) fn head_name(&self) -> Option<&str> {
        match self {
            Expr::Name(n) => Some(n),
            Expr::Field(base, _) => base.head_name(),
            _ => None,
        }
    }
}

pub(crate) const BINARY_OPS: &[(&str, u8)] = &[
    ("||", 1),
    ("&&", 2),
    ("|", 3),
    ("^", 4),
    ("&", 5),
    ("==", 6),
    ("!=", 6),
    ("<", 7),
    (">", 7),
    ("<=", 7),
    (">=", 7),
    ("<<", 8),
    (">>", 8),
    (">>>", 8),
    ("+", 9),
    ("-", 9),
    ("*", 10),
    ("/", 10),
    ("%", 10),
];

pub(crate) fn binary_op(text: &str) -> Option<(&'static str, u8)> {
    BINARY_OPS.iter().find(|(op, _)| *op == text).copied()
}

const PREC_INSTANCEOF: u8 = 7;
const PREC_UNARY: u8 = 11;
const PREC_POSTFIX: u8 = 12;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Assign(..) => 0,
        Expr::Cond(..) => 0,
        Expr::Binary(..) => binary_prec(e),
        Expr::InstanceOf(..) => PREC_INSTANCEOF,
        Expr::Unary(..) | Expr::Cast(..) => PREC_UNARY,
        Expr::Update(_, true, _) => PREC_UNARY,
        _ => PREC_POSTFIX,
    }
}

fn binary_prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, _, _) => binary_op(op).map(|(_, p)| p).unwrap_or(0),
        _ => 0,
    }
}

/// Prints an expression with the minimal parentheses needed to reparse it
/// into the same tree.
pub(crate) fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(e, &mut out);
    out
}

fn write_child(child: &Expr, min_prec: u8, out: &mut String) {
    if precedence(child) < min_prec {
        out.push('(');
        write_expr(child, out);
        out.push(')');
    } else {
        write_expr(child, out);
    }
}

fn write_args(args: &[Expr], out: &mut String) {
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(a, out);
    }
    out.push(')');
}

fn write_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Lit(s) | Expr::Name(s) => out.push_str(s),
        Expr::This => out.push_str("this"),
        Expr::Super => out.push_str("super"),
        Expr::ClassLit(t) => {
            out.push_str(t);
            out.push_str(".class");
        }
        Expr::Field(base, f) => {
            write_child(base, PREC_POSTFIX, out);
            out.push('.');
            out.push_str(f);
        }
        Expr::Call {
            recv, name, args, ..
        } => {
            if let Some(r) = recv {
                write_child(r, PREC_POSTFIX, out);
                out.push('.');
            }
            out.push_str(name);
            write_args(args, out);
        }
        Expr::New { ty, args, .. } => {
            out.push_str("new ");
            out.push_str(ty);
            write_args(args, out);
        }
        Expr::NewArray { ty, dims, init } => {
            out.push_str("new ");
            out.push_str(ty);
            for d in dims {
                out.push('[');
                if let Some(d) = d {
                    write_expr(d, out);
                }
                out.push(']');
            }
            if let Some(items) = init {
                out.push(' ');
                write_array_init(items, out);
            }
        }
        Expr::ArrayInit(items) => write_array_init(items, out),
        Expr::Index(base, idx) => {
            write_child(base, PREC_POSTFIX, out);
            out.push('[');
            write_expr(idx, out);
            out.push(']');
        }
        Expr::Unary(op, inner) => {
            out.push_str(op);
            // Keep `- -x` from lexing as `--x`.
            if matches!(&**inner, Expr::Unary(o, _) | Expr::Update(o, true, _) if o.starts_with(*op))
            {
                out.push(' ');
            }
            write_child(inner, PREC_UNARY, out);
        }
        Expr::Update(op, prefix, inner) => {
            if *prefix {
                out.push_str(op);
                write_child(inner, PREC_UNARY, out);
            } else {
                write_child(inner, PREC_POSTFIX, out);
                out.push_str(op);
            }
        }
        Expr::Binary(op, l, r) => {
            let p = binary_prec(e);
            write_child(l, p, out);
            out.push(' ');
            out.push_str(op);
            out.push(' ');
            write_child(r, p + 1, out);
        }
        Expr::Cond(c, a, b) => {
            write_child(c, 1, out);
            out.push_str(" ? ");
            write_child(a, 1, out);
            out.push_str(" : ");
            write_child(b, 0, out);
        }
        Expr::Cast(ty, inner) => {
            out.push('(');
            out.push_str(ty);
            out.push_str(") ");
            write_child(inner, PREC_UNARY, out);
        }
        Expr::InstanceOf(inner, ty) => {
            write_child(inner, PREC_INSTANCEOF, out);
            out.push_str(" instanceof ");
            out.push_str(ty);
        }
        Expr::Assign(op, target, value) => {
            write_child(target, PREC_POSTFIX, out);
            out.push(' ');
            out.push_str(op);
            out.push(' ');
            write_child(value, 0, out);
        }
    }
}

fn write_array_init(items: &[Expr], out: &mut String) {
    out.push('{');
    for (i, a) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(a, out);
    }
    out.push('}');
}

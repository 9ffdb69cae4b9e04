//! CPLEX LP text format: writer and a reader for the subset the writer emits.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{BackendError, Constraint, LinExpr, MathProgram, Sense, VarId, VarKind};

const TERMS_PER_LINE: usize = 8;

fn sanitize(raw: &str, index: usize, taken: &mut HashMap<String, usize>) -> String {
    let mut name: String = raw
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.[]()#".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    let first = name.chars().next();
    if first
        .map(|c| c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E')
        .unwrap_or(true)
    {
        name.insert_str(0, "v_");
    }
    if taken.contains_key(&name) {
        name = format!("{name}#{index}");
    }
    taken.insert(name.clone(), index);
    name
}

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:?}")
    }
}

fn write_terms(out: &mut String, terms: &[(VarId, f64)], names: &[String]) {
    if terms.is_empty() {
        out.push_str(" 0 ");
        out.push_str(&names.first().cloned().unwrap_or_default());
        return;
    }
    for (k, &(v, c)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c.is_sign_negative() { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", fmt_num(c.abs()), names[v.0]);
    }
}

pub fn write_lp(program: &MathProgram) -> String {
    let mut taken = HashMap::new();
    let names: Vec<String> = program
        .variables
        .iter()
        .enumerate()
        .map(|(i, v)| sanitize(&v.name, i, &mut taken))
        .collect();
    let mut taken_rows = HashMap::new();
    let mut out = String::new();
    out.push_str("\\ ruc debug model\nMinimize\n obj:");
    let objective = program.objective.clone().compact();
    if objective.terms.is_empty() && names.is_empty() {
        out.push_str(" 0");
    } else if objective.terms.is_empty() {
        write_terms(&mut out, &[], &names);
    } else {
        write_terms(&mut out, &objective.terms, &names);
    }
    if objective.constant != 0.0 {
        let sign = if objective.constant < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {}", fmt_num(objective.constant.abs()));
    }
    out.push_str("\nSubject To\n");
    for (r, c) in program.constraints.iter().enumerate() {
        let label = sanitize(
            if c.name.is_empty() { "r" } else { &c.name },
            r,
            &mut taken_rows,
        );
        let _ = write!(out, " {label}:");
        write_terms(&mut out, &c.terms, &names);
        let _ = writeln!(out, " {} {}", c.sense, fmt_num(c.rhs));
    }
    out.push_str("Bounds\n");
    for (name, v) in names.iter().zip(&program.variables) {
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {name} free");
        } else {
            let _ = writeln!(
                out,
                " {} <= {name} <= {}",
                fmt_num(v.lower),
                fmt_num(v.upper)
            );
        }
    }
    let binaries: Vec<&String> = names
        .iter()
        .zip(&program.variables)
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(n, _)| n)
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(TERMS_PER_LINE) {
            let line: Vec<&str> = chunk.iter().map(|s| s.as_str()).collect();
            let _ = writeln!(out, " {}", line.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    Num(f64),
    Plus,
    Minus,
    Colon,
    Op(Sense),
}

fn tokenize(text: &str) -> Result<Vec<Tok>, BackendError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '+' {
            toks.push(Tok::Plus);
            i += 1;
        } else if c == '-' {
            toks.push(Tok::Minus);
            i += 1;
        } else if c == ':' {
            toks.push(Tok::Colon);
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let mut j = i + 1;
            if j < chars.len() && chars[j] == '=' {
                j += 1;
            }
            let op: String = chars[i..j].iter().collect();
            let sense = match op.as_str() {
                "<" | "<=" | "=<" => Sense::Le,
                ">" | ">=" | "=>" => Sense::Ge,
                "=" | "==" => Sense::Eq,
                _ => return Err(BackendError::InvalidProgram(format!("bad operator `{op}`"))),
            };
            toks.push(Tok::Op(sense));
            i = j;
        } else if c.is_ascii_digit() || c == '.' {
            let mut j = i;
            while j < chars.len() {
                let d = chars[j];
                let exp_sign = (d == '+' || d == '-') && j > i && matches!(chars[j - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    j += 1;
                } else {
                    break;
                }
            }
            let s: String = chars[i..j].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| BackendError::InvalidProgram(format!("bad number `{s}`")))?;
            toks.push(Tok::Num(v));
            i = j;
        } else {
            let mut j = i;
            while j < chars.len() && !chars[j].is_whitespace() && !"+-:<>=".contains(chars[j]) {
                j += 1;
            }
            let w: String = chars[i..j].iter().collect();
            if w.eq_ignore_ascii_case("inf") || w.eq_ignore_ascii_case("infinity") {
                toks.push(Tok::Num(f64::INFINITY));
            } else {
                toks.push(Tok::Word(w));
            }
            i = j;
        }
    }
    Ok(toks)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Objective,
    Rows,
    Bounds,
    Binaries,
}

fn section_of(line: &str) -> Option<Option<Section>> {
    let l = line.trim().to_ascii_lowercase();
    match l.as_str() {
        "minimize" | "minimise" | "min" => Some(Some(Section::Objective)),
        "subject to" | "such that" | "st" | "s.t." => Some(Some(Section::Rows)),
        "bounds" => Some(Some(Section::Bounds)),
        "binaries" | "binary" | "bin" => Some(Some(Section::Binaries)),
        "end" => Some(None),
        _ => None,
    }
}

struct Builder {
    program: MathProgram,
    index: HashMap<String, VarId>,
}

impl Builder {
    fn var(&mut self, name: &str) -> VarId {
        if let Some(&v) = self.index.get(name) {
            return v;
        }
        let v = self.program.add_continuous(name, 0.0, f64::INFINITY);
        self.index.insert(name.to_string(), v);
        v
    }
}

/// Parse `[label:] ±c x ±c y ... [± const] [op rhs]`.
fn parse_expr(
    toks: &[Tok],
    b: &mut Builder,
) -> Result<(Option<String>, LinExpr, Option<(Sense, f64)>), BackendError> {
    let bad = |m: &str| BackendError::InvalidProgram(m.to_string());
    let mut k = 0;
    let mut label = None;
    if let (Some(Tok::Word(w)), Some(Tok::Colon)) = (toks.first(), toks.get(1)) {
        label = Some(w.clone());
        k = 2;
    }
    let mut expr = LinExpr::new();
    let mut tail = None;
    while k < toks.len() {
        let mut sign = 1.0;
        while let Some(t @ (Tok::Plus | Tok::Minus)) = toks.get(k) {
            if *t == Tok::Minus {
                sign = -sign;
            }
            k += 1;
        }
        match toks.get(k) {
            Some(Tok::Num(c)) => {
                let c = sign * c;
                k += 1;
                if let Some(Tok::Word(w)) = toks.get(k) {
                    let v = b.var(w);
                    expr.terms.push((v, c));
                    k += 1;
                } else {
                    expr.constant += c;
                }
            }
            Some(Tok::Word(w)) => {
                let v = b.var(w);
                expr.terms.push((v, sign));
                k += 1;
            }
            Some(Tok::Op(s)) => {
                let s = *s;
                k += 1;
                let mut rsign = 1.0;
                if let Some(Tok::Minus) = toks.get(k) {
                    rsign = -1.0;
                    k += 1;
                } else if let Some(Tok::Plus) = toks.get(k) {
                    k += 1;
                }
                match toks.get(k) {
                    Some(Tok::Num(r)) => tail = Some((s, rsign * r)),
                    _ => return Err(bad("row without a numeric right-hand side")),
                }
                k += 1;
                if k != toks.len() {
                    return Err(bad("trailing tokens after right-hand side"));
                }
            }
            None => break,
            Some(t) => return Err(bad(&format!("unexpected token {t:?}"))),
        }
    }
    Ok((label, expr, tail))
}

/// Split a section's tokens into rows, each starting at `label:`.
fn split_rows(toks: Vec<Tok>) -> Vec<Vec<Tok>> {
    let mut rows: Vec<Vec<Tok>> = Vec::new();
    let mut k = 0;
    while k < toks.len() {
        let starts = matches!(
            (&toks[k], toks.get(k + 1)),
            (Tok::Word(_), Some(Tok::Colon))
        );
        if starts || rows.is_empty() {
            rows.push(Vec::new());
        }
        rows.last_mut().expect("row").push(toks[k].clone());
        k += 1;
    }
    rows
}

pub fn read_lp(text: &str) -> Result<MathProgram, BackendError> {
    let bad = |m: String| BackendError::InvalidProgram(m);
    let mut sections: Vec<(Section, String)> = Vec::new();
    let mut current: Option<Section> = None;
    let mut ended = false;
    for raw in text.lines() {
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some(next) = section_of(line) {
            match next {
                Some(s) => {
                    current = Some(s);
                    sections.push((s, String::new()));
                }
                None => {
                    ended = true;
                    break;
                }
            }
            continue;
        }
        if current.is_none() {
            return Err(bad(format!(
                "content before the objective section: `{}`",
                line.trim()
            )));
        }
        let body = &mut sections.last_mut().expect("section").1;
        body.push_str(line);
        body.push('\n');
    }
    if !ended {
        return Err(bad("missing End".into()));
    }
    let mut b = Builder {
        program: MathProgram::new(),
        index: HashMap::new(),
    };
    // Declare variables in bounds order first so indices survive a round trip.
    for (s, body) in &sections {
        if *s == Section::Bounds {
            for line in body.lines() {
                for tok in tokenize(line)? {
                    if let Tok::Word(w) = tok {
                        if !w.eq_ignore_ascii_case("free") {
                            b.var(&w);
                        }
                    }
                }
            }
        }
    }
    for (s, body) in sections {
        match s {
            Section::Objective => {
                let (_, expr, tail) = parse_expr(&tokenize(&body)?, &mut b)?;
                if tail.is_some() {
                    return Err(bad("objective contains a comparison".into()));
                }
                b.program.objective = expr;
            }
            Section::Rows => {
                for row in split_rows(tokenize(&body)?) {
                    let (label, expr, tail) = parse_expr(&row, &mut b)?;
                    let (sense, rhs) = tail.ok_or_else(|| bad("row without comparison".into()))?;
                    let mut c = Constraint::from_expr(label.unwrap_or_default(), expr, sense);
                    c.rhs += rhs;
                    b.program.push(c);
                }
            }
            Section::Bounds => {
                for line in body.lines() {
                    parse_bound(&tokenize(line)?, &mut b)?;
                }
            }
            Section::Binaries => {
                for tok in tokenize(&body)? {
                    match tok {
                        Tok::Word(w) => {
                            let v = b.var(&w);
                            let var = &mut b.program.variables[v.0];
                            var.kind = VarKind::Binary;
                            var.lower = var.lower.max(0.0);
                            var.upper = var.upper.min(1.0);
                        }
                        t => return Err(bad(format!("unexpected token in binaries: {t:?}"))),
                    }
                }
            }
        }
    }
    b.program.validate()?;
    Ok(b.program)
}

fn parse_bound(toks: &[Tok], b: &mut Builder) -> Result<(), BackendError> {
    let bad = || BackendError::InvalidProgram(format!("unsupported bound line {toks:?}"));
    // Fold unary signs into numbers.
    let mut t: Vec<Tok> = Vec::new();
    let mut k = 0;
    while k < toks.len() {
        match (&toks[k], toks.get(k + 1)) {
            (Tok::Minus, Some(Tok::Num(x))) => {
                t.push(Tok::Num(-x));
                k += 2;
            }
            (Tok::Plus, Some(Tok::Num(x))) => {
                t.push(Tok::Num(*x));
                k += 2;
            }
            (tok, _) => {
                t.push(tok.clone());
                k += 1;
            }
        }
    }
    match t.as_slice() {
        [Tok::Word(name), Tok::Word(free)] if free.eq_ignore_ascii_case("free") => {
            let v = b.var(name);
            b.program.variables[v.0].lower = f64::NEG_INFINITY;
            b.program.variables[v.0].upper = f64::INFINITY;
        }
        [Tok::Num(lo), Tok::Op(Sense::Le), Tok::Word(name), Tok::Op(Sense::Le), Tok::Num(hi)] => {
            let v = b.var(name);
            b.program.variables[v.0].lower = *lo;
            b.program.variables[v.0].upper = *hi;
        }
        [Tok::Word(name), Tok::Op(s), Tok::Num(x)] => {
            let v = b.var(name);
            let var = &mut b.program.variables[v.0];
            match s {
                Sense::Le => var.upper = *x,
                Sense::Ge => var.lower = *x,
                Sense::Eq => {
                    var.lower = *x;
                    var.upper = *x;
                }
            }
        }
        [Tok::Num(x), Tok::Op(s), Tok::Word(name)] => {
            let v = b.var(name);
            let var = &mut b.program.variables[v.0];
            match s {
                Sense::Le => var.lower = *x,
                Sense::Ge => var.upper = *x,
                Sense::Eq => {
                    var.lower = *x;
                    var.upper = *x;
                }
            }
        }
        _ => return Err(bad()),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MathProgram {
        let mut p = MathProgram::new();
        let x = p.add_continuous("x gen[1]", 0.0, 10.0);
        let y = p.add_free("y");
        let b = p.add_binary("2on");
        let mut obj = LinExpr::term(x, 3.5);
        obj.add_term(y, -1e-7)
            .add_term(b, 100.0)
            .add_constant(-4.25);
        p.objective = obj;
        let mut e = LinExpr::term(x, 1.0);
        e.add_term(y, 1.0).add_constant(-2.0);
        p.add_constraint("bal ance", e, Sense::Eq);
        let mut e = LinExpr::term(y, 1.0);
        e.add_term(b, -50.0);
        p.add_constraint("", e, Sense::Le);
        p.add_constraint("lo", LinExpr::term(y, 1.0), Sense::Ge);
        p
    }

    #[test]
    fn round_trip_preserves_structure() {
        let p = sample();
        let text = write_lp(&p);
        let q = read_lp(&text).unwrap();
        assert_eq!(q.num_vars(), 3);
        assert_eq!(q.constraints.len(), 3);
        for (a, b) in p.variables.iter().zip(&q.variables) {
            assert_eq!((a.lower, a.upper, a.kind), (b.lower, b.upper, b.kind));
        }
        for (a, b) in p.constraints.iter().zip(&q.constraints) {
            assert_eq!(a.terms, b.terms);
            assert_eq!((a.sense, a.rhs), (b.sense, b.rhs));
        }
        assert_eq!(p.objective.clone().compact(), q.objective.clone().compact());
        assert_eq!(write_lp(&q), text);
    }

    #[test]
    fn long_rows_wrap_and_parse() {
        let mut p = MathProgram::new();
        let vars: Vec<_> = (0..30)
            .map(|i| p.add_continuous(format!("x{i}"), 0.0, 1.0))
            .collect();
        let mut e = LinExpr::new();
        for (i, &v) in vars.iter().enumerate() {
            e.add_term(v, (i + 1) as f64);
        }
        e.add_constant(-7.0);
        p.add_constraint("big", e, Sense::Ge);
        let text = write_lp(&p);
        assert!(text.lines().all(|l| l.len() < 255));
        let q = read_lp(&text).unwrap();
        assert_eq!(q.constraints[0].terms.len(), 30);
        assert_eq!(q.constraints[0].rhs, 7.0);
    }

    #[test]
    fn reads_hand_written_file() {
        let text = "\\ comment\nMinimize\n obj: x + 2 y\nSubject To\n c1: x + y >= 1\n c2: - x + y <= 3e0\nBounds\n x <= 4\n y >= -1\nEnd\n";
        let p = read_lp(text).unwrap();
        assert_eq!(p.variables[0].upper, 4.0);
        assert_eq!(p.variables[1].lower, -1.0);
        assert_eq!(p.constraints[1].terms[0].1, -1.0);
        assert_eq!(p.constraints[1].rhs, 3.0);
    }

    #[test]
    fn rejects_missing_end() {
        assert!(read_lp("Minimize\n obj: x\n").is_err());
    }
}

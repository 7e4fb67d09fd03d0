//! CPLEX LP text format: writer and a reader for the subset the writer emits.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use super::{Formulation, MilpError, MilpModel, Row, Sense, VarKind, Variable};

const LINE_WIDTH: usize = 100;

fn push_terms(out: &mut String, model: &MilpModel, terms: &[(usize, f64)], line_len: &mut usize) {
    for (k, &(v, c)) in terms.iter().enumerate() {
        let sign = if c < 0.0 { "-" } else { "+" };
        let term = if k == 0 && c >= 0.0 {
            format!("{} {}", c, model.vars[v].name)
        } else {
            format!("{} {} {}", sign, c.abs(), model.vars[v].name)
        };
        if *line_len + term.len() + 1 > LINE_WIDTH && *line_len > 0 {
            out.push_str("\n  ");
            *line_len = 2;
        } else if k > 0 {
            out.push(' ');
            *line_len += 1;
        }
        out.push_str(&term);
        *line_len += term.len();
    }
}

/// Renders the model as an LP file.
pub fn write_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ formulation {} batches_per_depot {}", model.formulation, model.batches_per_depot);
    let _ = writeln!(out, "\\ {} variables, {} constraints", model.n_vars(), model.n_rows());
    out.push_str("Minimize\n obj: ");
    let mut len = 6;
    push_terms(&mut out, model, &model.objective, &mut len);
    out.push_str("\nSubject To\n");
    for row in &model.rows {
        let head = format!(" {}: ", row.name);
        let mut len = head.len();
        out.push_str(&head);
        push_terms(&mut out, model, &row.terms, &mut len);
        let _ = writeln!(out, " {} {}", row.sense, row.rhs);
    }
    let continuous: Vec<&Variable> = model.vars.iter().filter(|v| v.kind == VarKind::Continuous).collect();
    if !continuous.is_empty() {
        out.push_str("Bounds\n");
        for v in continuous {
            let _ = writeln!(out, " {} >= 0", v.name);
        }
    }
    out.push_str("Binaries\n");
    for v in model.vars.iter().filter(|v| v.kind == VarKind::Binary) {
        let _ = writeln!(out, " {}", v.name);
    }
    out.push_str("End\n");
    out
}

pub fn write_lp_file(model: &MilpModel, path: &Path) -> Result<(), MilpError> {
    std::fs::write(path, write_lp(model))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(f64),
    Plus,
    Minus,
    Colon,
    Sense(Sense),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn section_of(line: &str) -> Option<Section> {
    match line.trim().to_ascii_lowercase().as_str() {
        "minimize" | "minimise" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "binaries" | "binary" | "bin" => Some(Section::Binaries),
        "generals" | "general" | "gen" => Some(Section::Generals),
        "end" => Some(Section::End),
        _ => None,
    }
}

fn lex(line: &str, lineno: usize, out: &mut Vec<(usize, Tok)>) -> Result<(), MilpError> {
    let b = line.as_bytes();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        match c {
            ' ' | '\t' | '\r' => i += 1,
            '+' => {
                out.push((lineno, Tok::Plus));
                i += 1;
            }
            '-' => {
                out.push((lineno, Tok::Minus));
                i += 1;
            }
            ':' => {
                out.push((lineno, Tok::Colon));
                i += 1;
            }
            '<' | '>' | '=' => {
                let mut j = i + 1;
                if j < b.len() && (b[j] == b'=' || b[j] == b'<' || b[j] == b'>') {
                    j += 1;
                }
                let s = match c {
                    '<' => Sense::Le,
                    '>' => Sense::Ge,
                    _ if j > i + 1 && b[i + 1] == b'<' => Sense::Le,
                    _ if j > i + 1 && b[i + 1] == b'>' => Sense::Ge,
                    _ => Sense::Eq,
                };
                out.push((lineno, Tok::Sense(s)));
                i = j;
            }
            _ if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                while j < b.len() && (b[j].is_ascii_digit() || b[j] == b'.') {
                    j += 1;
                }
                if j < b.len() && (b[j] == b'e' || b[j] == b'E') {
                    let mut k = j + 1;
                    if k < b.len() && (b[k] == b'+' || b[k] == b'-') {
                        k += 1;
                    }
                    if k < b.len() && b[k].is_ascii_digit() {
                        j = k;
                        while j < b.len() && b[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                }
                let text = &line[i..j];
                let v: f64 = text.parse().map_err(|_| MilpError::Parse { line: lineno, msg: format!("bad number {text}") })?;
                out.push((lineno, Tok::Num(v)));
                i = j;
            }
            _ => {
                let mut j = i;
                while j < b.len() && !matches!(b[j], b' ' | b'\t' | b'\r' | b'+' | b'-' | b':' | b'<' | b'>' | b'=') {
                    j += 1;
                }
                out.push((lineno, Tok::Word(line[i..j].to_string())));
                i = j;
            }
        }
    }
    Ok(())
}

struct Parser {
    vars: Vec<Variable>,
    index: HashMap<String, usize>,
}

impl Parser {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.vars.len();
        self.index.insert(name.to_string(), i);
        self.vars.push(Variable { name: name.to_string(), kind: VarKind::Continuous });
        i
    }

    /// Linear expression up to (not including) a sense token or the end.
    fn expr(&mut self, toks: &[(usize, Tok)], pos: &mut usize) -> Result<Vec<(usize, f64)>, MilpError> {
        let mut terms = Vec::new();
        let mut sign = 1.0;
        let mut coef: Option<f64> = None;
        while *pos < toks.len() {
            let (line, t) = &toks[*pos];
            match t {
                Tok::Sense(_) => break,
                Tok::Plus => {}
                Tok::Minus => sign = -sign,
                Tok::Num(v) => {
                    if coef.is_some() {
                        return Err(MilpError::Parse { line: *line, msg: "two numbers in a row".into() });
                    }
                    coef = Some(*v);
                }
                Tok::Word(w) => {
                    let v = self.var(w);
                    terms.push((v, sign * coef.unwrap_or(1.0)));
                    sign = 1.0;
                    coef = None;
                }
                Tok::Colon => return Err(MilpError::Parse { line: *line, msg: "unexpected ':'".into() }),
            }
            *pos += 1;
        }
        if coef.is_some() {
            let line = toks.get(pos.saturating_sub(1)).map_or(0, |t| t.0);
            return Err(MilpError::Parse { line, msg: "constant terms are not supported".into() });
        }
        Ok(terms)
    }
}

fn parse_header(line: &str) -> Option<(Formulation, usize)> {
    let words: Vec<&str> = line.trim_start_matches('\\').split_whitespace().collect();
    match words.as_slice() {
        ["formulation", f, "batches_per_depot", b] => {
            let f = match *f {
                "three" => Formulation::ThreeIndex,
                "two" => Formulation::TwoCommodity,
                _ => return None,
            };
            Some((f, b.parse().ok()?))
        }
        _ => None,
    }
}

/// Parses an LP file produced by [`write_lp`]. The formulation header comment
/// is required.
pub fn read_lp(text: &str) -> Result<MilpModel, MilpError> {
    let mut header = None;
    let mut sections: Vec<(Section, Vec<(usize, Tok)>)> = Vec::new();
    let mut current = Section::None;
    let mut toks = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let lineno = k + 1;
        if let Some(rest) = raw.trim_start().strip_prefix('\\') {
            if header.is_none() {
                header = parse_header(rest);
            }
            continue;
        }
        let line = raw.split('\\').next().unwrap_or("");
        if let Some(s) = section_of(line) {
            sections.push((current, std::mem::take(&mut toks)));
            current = s;
            continue;
        }
        if current == Section::End {
            if !line.trim().is_empty() {
                return Err(MilpError::Parse { line: lineno, msg: "content after End".into() });
            }
            continue;
        }
        if current == Section::None && !line.trim().is_empty() {
            return Err(MilpError::Parse { line: lineno, msg: "content before the objective section".into() });
        }
        lex(line, lineno, &mut toks)?;
    }
    sections.push((current, toks));
    if current != Section::End {
        return Err(MilpError::Parse { line: text.lines().count(), msg: "missing End".into() });
    }
    let (formulation, batches) =
        header.ok_or_else(|| MilpError::Parse { line: 1, msg: "missing formulation header comment".into() })?;

    let mut p = Parser { vars: Vec::new(), index: HashMap::new() };
    let mut objective = Vec::new();
    let mut rows = Vec::new();
    let mut binaries = HashSet::new();
    for (sec, toks) in sections {
        let mut pos = 0;
        match sec {
            Section::None | Section::End => {}
            Section::Objective => {
                if let [(_, Tok::Word(_)), (_, Tok::Colon), ..] = toks.as_slice() {
                    pos = 2;
                }
                objective = p.expr(&toks, &mut pos)?;
                if pos < toks.len() {
                    return Err(MilpError::Parse { line: toks[pos].0, msg: "objective has a relation".into() });
                }
            }
            Section::Constraints => {
                let mut n = 0;
                while pos < toks.len() {
                    n += 1;
                    let name = match (&toks[pos], toks.get(pos + 1)) {
                        ((_, Tok::Word(w)), Some((_, Tok::Colon))) => {
                            pos += 2;
                            w.clone()
                        }
                        _ => format!("R{n}"),
                    };
                    let terms = p.expr(&toks, &mut pos)?;
                    let line = toks.get(pos).map_or(0, |t| t.0);
                    let Some((_, Tok::Sense(sense))) = toks.get(pos) else {
                        return Err(MilpError::Parse { line, msg: format!("row {name} has no relation") });
                    };
                    let sense = *sense;
                    pos += 1;
                    let mut sign = 1.0;
                    while let Some((_, Tok::Minus | Tok::Plus)) = toks.get(pos) {
                        if toks[pos].1 == Tok::Minus {
                            sign = -sign;
                        }
                        pos += 1;
                    }
                    let Some((_, Tok::Num(rhs))) = toks.get(pos) else {
                        return Err(MilpError::Parse { line, msg: format!("row {name} has no right-hand side") });
                    };
                    rows.push(Row { name, terms, sense, rhs: sign * rhs });
                    pos += 1;
                }
            }
            Section::Bounds => {
                for (_, t) in &toks {
                    if let Tok::Word(w) = t {
                        if !w.eq_ignore_ascii_case("free") && !w.eq_ignore_ascii_case("inf") && !w.eq_ignore_ascii_case("infinity") {
                            p.var(w);
                        }
                    }
                }
            }
            Section::Binaries | Section::Generals => {
                for (line, t) in &toks {
                    match t {
                        Tok::Word(w) => {
                            p.var(w);
                            if sec == Section::Binaries {
                                binaries.insert(w.clone());
                            }
                        }
                        _ => return Err(MilpError::Parse { line: *line, msg: "expected a variable name".into() }),
                    }
                }
            }
        }
    }
    for v in &mut p.vars {
        if binaries.contains(&v.name) {
            v.kind = VarKind::Binary;
        }
    }
    Ok(MilpModel::from_parts(formulation, batches, p.vars, objective, rows))
}

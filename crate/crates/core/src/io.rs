//! File formats: codebooks, survey CSV, posterior draws and `rho` tables.
//!
//! Levels are one-based in every human-facing file (dataset CSV, codebook,
//! `rho` tables) and zero-based in the machine-oriented draws file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ObservationBlock};
use crate::draws::{Draw, DrawsMeta, PosteriorDraws};
use crate::error::{Error, Result};
use crate::experiments::{RecoveryTable, RhoValue};
use crate::link::LinkFunction;
use crate::model::{CategoricalSchema, ProbabilityVector, WeightLadder};
use crate::stick::StateHyper;

pub const DRAWS_MAGIC: &str = "dynparafac-draws";
pub const DRAWS_VERSION: &str = "v1";
const DRAWS_COLUMNS: &str = "chain,draw,kind,t,h,j,l,value";
/// Tokens read as missing regardless of the codebook.
pub const MISSING_TOKENS: [&str; 2] = ["", "NA"];

/// One categorical variable of a codebook.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: String,
    pub levels: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    /// `[raw, level]` pairs with one-based levels; empty means identity on `1..=levels`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub recode: Vec<(i64, usize)>,
    /// Raw codes read as missing.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_codes: Vec<i64>,
}

impl VariableSpec {
    pub fn identity(name: impl Into<String>, levels: usize) -> Self {
        VariableSpec {
            name: name.into(),
            levels,
            labels: Vec::new(),
            recode: Vec::new(),
            missing_codes: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        let name = &self.name;
        if self.levels < 2 {
            return Err(Error::validation(format!("variable '{name}' needs at least 2 levels")));
        }
        if !self.labels.is_empty() && self.labels.len() != self.levels {
            return Err(Error::validation(format!(
                "variable '{name}' has {} labels for {} levels",
                self.labels.len(),
                self.levels
            )));
        }
        let mut raws = BTreeSet::new();
        let mut hit = vec![false; self.levels];
        for &(raw, level) in &self.recode {
            if level == 0 || level > self.levels {
                return Err(Error::validation(format!(
                    "variable '{name}': code {raw} maps to level {level} outside 1..={}",
                    self.levels
                )));
            }
            if !raws.insert(raw) {
                return Err(Error::validation(format!("variable '{name}': code {raw} recoded twice")));
            }
            hit[level - 1] = true;
        }
        if !self.recode.is_empty() && hit.iter().any(|h| !h) {
            return Err(Error::validation(format!(
                "variable '{name}': recode map must reach every level 1..={}",
                self.levels
            )));
        }
        if let Some(raw) = self.missing_codes.iter().find(|r| raws.contains(r)) {
            return Err(Error::validation(format!(
                "variable '{name}': code {raw} is both recoded and missing"
            )));
        }
        Ok(())
    }

    /// Zero-based level of a raw token, `None` when missing.
    fn decode(&self, token: &str) -> std::result::Result<Option<u16>, String> {
        let token = token.trim();
        if MISSING_TOKENS.contains(&token) {
            return Ok(None);
        }
        let raw: i64 = token.parse().map_err(|_| format!("'{token}' is not an integer code"))?;
        if self.missing_codes.contains(&raw) {
            return Ok(None);
        }
        let level = if self.recode.is_empty() {
            (raw >= 1 && raw as usize <= self.levels).then_some(raw as usize)
        } else {
            self.recode.iter().find(|(r, _)| *r == raw).map(|&(_, l)| l)
        };
        level
            .map(|l| Some((l - 1) as u16))
            .ok_or_else(|| format!("unknown code {raw}"))
    }

    /// Raw code written for a zero-based level: the smallest code mapping to it.
    fn encode(&self, level: u16) -> i64 {
        let level = level as usize + 1;
        if self.recode.is_empty() {
            return level as i64;
        }
        self.recode
            .iter()
            .filter(|(_, l)| *l == level)
            .map(|&(r, _)| r)
            .min()
            .expect("validated codebooks reach every level")
    }
}

/// Variables of a survey file, in schema order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Codebook {
    #[serde(rename = "variable")]
    pub variables: Vec<VariableSpec>,
}

impl Codebook {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self> {
        let book = Codebook { variables };
        book.validate()?;
        Ok(book)
    }

    /// Identity codebook with names `v1..vp`.
    pub fn from_schema(schema: &CategoricalSchema) -> Self {
        Codebook {
            variables: schema
                .levels()
                .iter()
                .enumerate()
                .map(|(j, &d)| VariableSpec::identity(format!("v{}", j + 1), d))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.variables.is_empty() {
            return Err(Error::validation("codebook declares no variables"));
        }
        let mut names = BTreeSet::new();
        for v in &self.variables {
            if v.name == "time" {
                return Err(Error::validation("'time' is reserved for the wave column"));
            }
            if !names.insert(v.name.as_str()) {
                return Err(Error::validation(format!("variable '{}' declared twice", v.name)));
            }
            v.validate()?;
        }
        Ok(())
    }

    pub fn schema(&self) -> Result<CategoricalSchema> {
        CategoricalSchema::new(self.variables.iter().map(|v| v.levels).collect())
    }
}

pub fn load_codebook(path: &Path) -> Result<Codebook> {
    let text = fs::read_to_string(path)?;
    let book: Codebook =
        toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    book.validate()?;
    Ok(book)
}

pub fn write_codebook(book: &Codebook, path: &Path) -> Result<()> {
    let text = toml::to_string(book).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

/// Reads a survey CSV with a `time` column and one column per codebook variable.
///
/// Rows of a wave must be contiguous and waves strictly increasing. Empty,
/// `NA` and declared missing codes are masked; a codebook variable with no
/// column, or with no value in some wave, is masked there. Columns not in the
/// codebook are ignored.
pub fn parse_dataset<R: Read>(reader: R, codebook: &Codebook) -> Result<Dataset> {
    codebook.validate()?;
    let schema = codebook.schema()?;
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = csv.headers().map_err(|e| Error::parse(1, e.to_string()))?.clone();
    let time_col = header
        .iter()
        .position(|h| h == "time")
        .ok_or_else(|| Error::parse(1, "missing 'time' column"))?;
    let columns: Vec<Option<usize>> = codebook
        .variables
        .iter()
        .map(|v| header.iter().position(|h| h == v.name))
        .collect();
    let p = codebook.variables.len();
    let mut labels: Vec<i64> = Vec::new();
    let mut blocks: Vec<ObservationBlock> = Vec::new();
    let mut row = vec![None; p];
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let raw_time = &record[time_col];
        let time: i64 = raw_time
            .parse()
            .map_err(|_| Error::parse(line, format!("column 'time': '{raw_time}' is not an integer")))?;
        match labels.last() {
            Some(&last) if last == time => {}
            Some(&last) if time < last || labels.contains(&time) => {
                return Err(Error::parse(
                    line,
                    format!("time {time} after {last}: waves must be contiguous and increasing"),
                ));
            }
            _ => {
                labels.push(time);
                blocks.push(ObservationBlock::empty(p));
            }
        }
        for (j, (spec, col)) in codebook.variables.iter().zip(&columns).enumerate() {
            row[j] = match col {
                Some(c) => spec
                    .decode(&record[*c])
                    .map_err(|m| Error::parse(line, format!("column '{}': {m}", spec.name)))?,
                None => None,
            };
        }
        blocks.last_mut().expect("a block was opened").push_subject(&row)?;
    }
    Dataset::new(schema, labels, blocks)
}

pub fn load_dataset(path: &Path, codebook: &Codebook) -> Result<Dataset> {
    parse_dataset(fs::File::open(path)?, codebook)
        .map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })
}

/// Inverse of [`parse_dataset`]: masked entries are written empty.
pub fn format_dataset(data: &Dataset, codebook: &Codebook) -> Result<String> {
    if codebook.schema()? != *data.schema() {
        return Err(Error::validation("codebook does not match the dataset schema"));
    }
    let mut out = String::from("time");
    for v in &codebook.variables {
        out.push(',');
        out.push_str(&v.name);
    }
    out.push('\n');
    for (label, block) in data.time_labels().iter().zip(data.blocks()) {
        for s in block.subjects() {
            write!(out, "{label}").expect("string write");
            for (v, x) in codebook.variables.iter().zip(s) {
                out.push(',');
                if let Some(l) = x {
                    write!(out, "{}", v.encode(*l)).expect("string write");
                }
            }
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn write_dataset(data: &Dataset, codebook: &Codebook, path: &Path) -> Result<()> {
    fs::write(path, format_dataset(data, codebook)?)?;
    Ok(())
}

/// Seventeen significant digits, enough for an exact `f64` round trip.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn draw_rows(d: &Draw) -> usize {
    let k = d.num_components();
    let atom_entries: usize = d.atoms.first().map_or(0, |a| a.iter().map(|v| v.len()).sum());
    4 * d.hyper.is_some() as usize + 1 + d.ladders.len() * (k + 1) + k * atom_entries + d.alpha_last.len()
}

/// Serializes draws: a `#` header describing the schema and row count, a
/// column header, then one scalar per row with 17 significant digits.
pub fn format_draws(draws: &PosteriorDraws) -> String {
    let meta = draws.meta();
    let rows: usize = draws.draws().iter().map(draw_rows).sum();
    let levels: Vec<String> = meta.schema.levels().iter().map(|d| d.to_string()).collect();
    let mut out = format!(
        "# {DRAWS_MAGIC} {DRAWS_VERSION} rows={rows} p={} levels={} times={} link={} a={} generator={}\n{DRAWS_COLUMNS}\n",
        meta.schema.num_vars(),
        levels.join(","),
        meta.times,
        meta.link.name(),
        format_number(meta.dirichlet_a),
        meta.generator,
    );
    for d in draws.draws() {
        let (c, i) = (d.chain, d.index);
        if let Some(h) = d.hyper {
            for (kind, v) in [("mu", h.mu), ("phi", h.phi), ("sigma2_eps", h.sigma2_eps), ("sigma2_eta", h.sigma2_eta)] {
                writeln!(out, "{c},{i},{kind},,,,,{}", format_number(v)).expect("string write");
            }
        }
        writeln!(out, "{c},{i},kstar,,,,,{}", d.kstar).expect("string write");
        for (t, ladder) in d.ladders.iter().enumerate() {
            for (h, w) in ladder.weights().iter().enumerate() {
                writeln!(out, "{c},{i},nu,{t},{h},,,{}", format_number(*w)).expect("string write");
            }
            writeln!(out, "{c},{i},remainder,{t},,,,{}", format_number(ladder.remainder())).expect("string write");
        }
        for (h, per_var) in d.atoms.iter().enumerate() {
            for (j, atom) in per_var.iter().enumerate() {
                for (l, v) in atom.as_slice().iter().enumerate() {
                    writeln!(out, "{c},{i},atom,,{h},{j},{l},{}", format_number(*v)).expect("string write");
                }
            }
        }
        for (h, a) in d.alpha_last.iter().enumerate() {
            writeln!(out, "{c},{i},alpha_last,,{h},,,{}", format_number(*a)).expect("string write");
        }
    }
    out
}

pub fn write_draws(draws: &PosteriorDraws, path: &Path) -> Result<()> {
    fs::write(path, format_draws(draws))?;
    Ok(())
}

fn parse_header(line: &str) -> Result<(DrawsMeta, usize)> {
    let mut tokens = line
        .strip_prefix('#')
        .ok_or_else(|| Error::Format("draws file has no header".into()))?
        .split_whitespace();
    if tokens.next() != Some(DRAWS_MAGIC) {
        return Err(Error::Format("not a draws file".into()));
    }
    match tokens.next() {
        Some(DRAWS_VERSION) => {}
        other => {
            return Err(Error::Format(format!(
                "unsupported draws version {}, expected {DRAWS_VERSION}",
                other.unwrap_or("(none)")
            )))
        }
    }
    let fields: BTreeMap<&str, &str> = tokens.filter_map(|t| t.split_once('=')).collect();
    let field = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| Error::Format(format!("draws header lacks '{k}'")))
    };
    let bad = |k: &str| Error::Format(format!("draws header field '{k}' is malformed"));
    let rows: usize = field("rows")?.parse().map_err(|_| bad("rows"))?;
    let levels: Vec<usize> = field("levels")?
        .split(',')
        .map(|d| d.parse().map_err(|_| bad("levels")))
        .collect::<Result<_>>()?;
    let p: usize = field("p")?.parse().map_err(|_| bad("p"))?;
    if p != levels.len() {
        return Err(bad("p"));
    }
    let meta = DrawsMeta {
        schema: CategoricalSchema::new(levels)?,
        times: field("times")?.parse().map_err(|_| bad("times"))?,
        link: LinkFunction::parse(field("link")?)?,
        dirichlet_a: field("a")?.parse().map_err(|_| bad("a"))?,
        generator: field("generator")?.to_string(),
    };
    Ok((meta, rows))
}

/// Accumulates the rows of one draw.
#[derive(Default)]
struct DrawBuilder {
    chain: usize,
    index: usize,
    hyper: [Option<f64>; 4],
    kstar: Option<usize>,
    nu: Vec<Vec<f64>>,
    remainder: Vec<Option<f64>>,
    atoms: Vec<Vec<Vec<f64>>>,
    alpha_last: Vec<f64>,
}

impl DrawBuilder {
    fn new(chain: usize, index: usize, meta: &DrawsMeta) -> Self {
        DrawBuilder {
            chain,
            index,
            nu: vec![Vec::new(); meta.times],
            remainder: vec![None; meta.times],
            ..Default::default()
        }
    }

    fn finish(self, meta: &DrawsMeta) -> Result<Draw> {
        let incomplete = |what: &str| {
            Error::Format(format!("draw {} of chain {} lacks {what}", self.index, self.chain))
        };
        let hyper = match self.hyper {
            [None, None, None, None] => None,
            [Some(mu), Some(phi), Some(s2e), Some(s2h)] => Some(StateHyper::new(mu, phi, s2e, s2h)?),
            _ => return Err(incomplete("some hyperparameters")),
        };
        let ladders = self
            .nu
            .into_iter()
            .zip(&self.remainder)
            .map(|(w, r)| WeightLadder::new(w, r.ok_or_else(|| incomplete("a remainder"))?))
            .collect::<Result<Vec<_>>>()?;
        let atoms = self
            .atoms
            .into_iter()
            .map(|per_var| {
                if per_var.len() != meta.schema.num_vars() {
                    return Err(incomplete("atom variables"));
                }
                per_var.into_iter().map(ProbabilityVector::new).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Draw {
            chain: self.chain,
            index: self.index,
            hyper,
            kstar: self.kstar.ok_or_else(|| incomplete("kstar"))?,
            ladders,
            atoms,
            alpha_last: self.alpha_last,
        })
    }
}

fn parse_index(field: &str, what: &str, line: usize) -> Result<usize> {
    field
        .parse()
        .map_err(|_| Error::parse(line, format!("bad {what} index '{field}'")))
}

/// Appends `value` at position `at`, which must be the next free slot.
fn push_at<T>(v: &mut Vec<T>, at: usize, value: T, line: usize) -> Result<()> {
    if at != v.len() {
        return Err(Error::parse(line, "rows of a draw are out of order"));
    }
    v.push(value);
    Ok(())
}

/// Parses the output of [`format_draws`]; a file cut short is an error.
pub fn parse_draws(text: &str) -> Result<PosteriorDraws> {
    if !text.ends_with('\n') {
        return Err(Error::Format("draws file is truncated".into()));
    }
    let mut lines = text.lines();
    let (meta, rows) = parse_header(lines.next().unwrap_or(""))?;
    if lines.next() != Some(DRAWS_COLUMNS) {
        return Err(Error::Format(format!("expected column header '{DRAWS_COLUMNS}'")));
    }
    let mut draws = Vec::new();
    let mut current: Option<DrawBuilder> = None;
    let mut seen = 0;
    for (n, line) in lines.enumerate() {
        let line_no = n + 3;
        seen += 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::parse(line_no, format!("expected 8 fields, found {}", f.len())));
        }
        let chain = parse_index(f[0], "chain", line_no)?;
        let index = parse_index(f[1], "draw", line_no)?;
        if current.as_ref().is_none_or(|b| (b.chain, b.index) != (chain, index)) {
            if let Some(b) = current.take() {
                draws.push(b.finish(&meta)?);
            }
            current = Some(DrawBuilder::new(chain, index, &meta));
        }
        let b = current.as_mut().expect("builder exists");
        let value = || -> Result<f64> {
            f[7].parse()
                .map_err(|_| Error::parse(line_no, format!("bad value '{}'", f[7])))
        };
        let t = || -> Result<usize> {
            let t = parse_index(f[3], "time", line_no)?;
            if t >= meta.times {
                return Err(Error::parse(line_no, format!("time {t} out of range")));
            }
            Ok(t)
        };
        let h = || parse_index(f[4], "component", line_no);
        match f[2] {
            "mu" => b.hyper[0] = Some(value()?),
            "phi" => b.hyper[1] = Some(value()?),
            "sigma2_eps" => b.hyper[2] = Some(value()?),
            "sigma2_eta" => b.hyper[3] = Some(value()?),
            "kstar" => b.kstar = Some(parse_index(f[7], "kstar", line_no)?),
            "nu" => {
                let t = t()?;
                push_at(&mut b.nu[t], h()?, value()?, line_no)?;
            }
            "remainder" => {
                let t = t()?;
                b.remainder[t] = Some(value()?);
            }
            "atom" => {
                let (h, j, l) = (h()?, parse_index(f[5], "variable", line_no)?, parse_index(f[6], "level", line_no)?);
                if h == b.atoms.len() {
                    b.atoms.push(Vec::new());
                }
                let per_var = b
                    .atoms
                    .get_mut(h)
                    .ok_or_else(|| Error::parse(line_no, "rows of a draw are out of order"))?;
                if j == per_var.len() {
                    per_var.push(Vec::new());
                }
                let atom = per_var
                    .get_mut(j)
                    .ok_or_else(|| Error::parse(line_no, "rows of a draw are out of order"))?;
                push_at(atom, l, value()?, line_no)?;
            }
            "alpha_last" => push_at(&mut b.alpha_last, h()?, value()?, line_no)?,
            other => return Err(Error::parse(line_no, format!("unknown row kind '{other}'"))),
        }
    }
    if seen != rows {
        return Err(Error::Format(format!(
            "draws file is truncated: {seen} of {rows} rows present"
        )));
    }
    if let Some(b) = current {
        draws.push(b.finish(&meta)?);
    }
    PosteriorDraws::new(meta, draws)
}

pub fn read_draws(path: &Path) -> Result<PosteriorDraws> {
    parse_draws(&fs::read_to_string(path)?)
}

/// Posterior `rho` summaries as `t,j,j2,mean,q025,q975` with one-based indices
/// and `j < j2`. `pairs` restricts the output; `None` writes every pair.
pub fn format_rho_summary(draws: &PosteriorDraws, pairs: Option<&[(usize, usize)]>) -> Result<String> {
    let keep: Option<BTreeSet<(usize, usize)>> =
        pairs.map(|ps| ps.iter().map(|&(j, k)| (j.min(k), j.max(k))).collect());
    let mut out = String::from("t,j,j2,mean,q025,q975\n");
    for r in draws.rho_summary()? {
        if keep.as_ref().is_some_and(|k| !k.contains(&(r.j, r.k))) {
            continue;
        }
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.t + 1,
            r.j + 1,
            r.k + 1,
            format_number(r.mean),
            format_number(r.q025),
            format_number(r.q975)
        )
        .expect("string write");
    }
    Ok(out)
}

pub fn write_rho_summary(draws: &PosteriorDraws, pairs: Option<&[(usize, usize)]>, path: &Path) -> Result<()> {
    fs::write(path, format_rho_summary(draws, pairs)?)?;
    Ok(())
}

/// Point values of `rho` as `t,j,j2,value` with one-based indices.
pub fn format_rho_values(values: &[RhoValue]) -> String {
    let mut out = String::from("t,j,j2,value\n");
    for r in values {
        writeln!(out, "{},{},{},{}", r.t + 1, r.j.min(r.k) + 1, r.j.max(r.k) + 1, format_number(r.value))
            .expect("string write");
    }
    out
}

pub fn write_rho_values(values: &[RhoValue], path: &Path) -> Result<()> {
    fs::write(path, format_rho_values(values))?;
    Ok(())
}

/// Reads a `rho` table written by [`format_rho_values`] or
/// [`format_rho_summary`]; the estimate is the `value` or `mean` column.
pub fn parse_rho_values(text: &str) -> Result<Vec<RhoValue>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let (Some(t), Some(j), Some(k)) = (col("t"), col("j"), col("j2")) else {
        return Err(Error::parse(1, "rho table needs t, j and j2 columns"));
    };
    let v = col("value")
        .or_else(|| col("mean"))
        .ok_or_else(|| Error::parse(1, "rho table needs a value or mean column"))?;
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line_no = n + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != header.len() {
            return Err(Error::parse(line_no, "wrong number of fields"));
        }
        let one_based = |i: usize| -> Result<usize> {
            match f[i].parse::<usize>() {
                Ok(x) if x >= 1 => Ok(x - 1),
                _ => Err(Error::parse(line_no, format!("bad index '{}'", f[i]))),
            }
        };
        out.push(RhoValue {
            t: one_based(t)?,
            j: one_based(j)?,
            k: one_based(k)?,
            value: f[v].parse().map_err(|_| Error::parse(line_no, format!("bad value '{}'", f[v])))?,
        });
    }
    Ok(out)
}

pub fn read_rho_values(path: &Path) -> Result<Vec<RhoValue>> {
    parse_rho_values(&fs::read_to_string(path)?)
}

/// Recovery correlations as `t,correlation`, then a `pooled` row; undefined
/// correlations are written `NA`.
pub fn format_recovery(table: &RecoveryTable) -> String {
    let cell = |c: Option<f64>| c.map_or_else(|| "NA".to_string(), format_number);
    let mut out = String::from("t,correlation\n");
    for (t, c) in &table.per_time {
        writeln!(out, "{},{}", t + 1, cell(*c)).expect("string write");
    }
    writeln!(out, "pooled,{}", cell(table.pooled)).expect("string write");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn book() -> Codebook {
        Codebook::new(vec![
            VariableSpec {
                name: "a".into(),
                levels: 2,
                labels: vec!["lo".into(), "hi".into()],
                recode: vec![(1, 1), (2, 1), (3, 2)],
                missing_codes: vec![9],
            },
            VariableSpec::identity("b", 3),
        ])
        .unwrap()
    }

    #[test]
    fn single_wave_without_missing() {
        let d = parse_dataset("time,a,b\n1,1,2\n1,3,3\n".as_bytes(), &book()).unwrap();
        assert_eq!(d.sample_sizes(), vec![2]);
        assert_eq!(d.block(0).subject(0), &[Some(0), Some(1)]);
        assert_eq!(d.block(0).subject(1), &[Some(1), Some(2)]);
    }

    #[test]
    fn recode_and_missing_tokens() {
        let d = parse_dataset("time,b,a\n4,,2\n4,NA,9\n".as_bytes(), &book()).unwrap();
        assert_eq!(d.block(0).subject(0), &[Some(0), None]);
        assert_eq!(d.block(0).subject(1), &[None, None]);
        assert_eq!(d.time_labels(), &[4]);
    }

    #[test]
    fn variable_absent_in_one_wave() {
        let d = parse_dataset("time,a,b\n1,1,1\n2,1,\n2,3,\n3,1,2\n".as_bytes(), &book()).unwrap();
        assert!(!d.block(0).variable_absent(1));
        assert!(d.block(1).variable_absent(1));
        assert!(!d.block(1).variable_absent(0));
        assert!(!d.block(2).variable_absent(1));
    }

    #[test]
    fn unknown_code_names_row_and_column() {
        let err = parse_dataset("time,a,b\n1,1,1\n1,4,1\n".as_bytes(), &book()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("'a'") && msg.contains("4"), "{msg}");
    }

    #[test]
    fn rejects_bad_time_order() {
        assert!(parse_dataset("time,a,b\n2,1,1\n1,1,1\n".as_bytes(), &book()).is_err());
        assert!(parse_dataset("time,a,b\n1,1,1\n2,1,1\n1,1,1\n".as_bytes(), &book()).is_err());
        assert!(parse_dataset("a,b\n1,1\n".as_bytes(), &book()).is_err());
    }

    #[test]
    fn rejects_inconsistent_codebooks() {
        let mut v = VariableSpec::identity("x", 2);
        v.recode = vec![(1, 1), (2, 1)];
        assert!(Codebook::new(vec![v.clone()]).is_err());
        v.recode = vec![(1, 1), (2, 3)];
        assert!(Codebook::new(vec![v.clone()]).is_err());
        v.recode = vec![(1, 1), (2, 2)];
        v.missing_codes = vec![2];
        assert!(Codebook::new(vec![v]).is_err());
        assert!(Codebook::new(vec![VariableSpec::identity("time", 2)]).is_err());
    }

    #[test]
    fn dataset_text_round_trip() {
        let text = "time,a,b\n1,1,2\n1,3,\n5,,1\n";
        let d = parse_dataset(text.as_bytes(), &book()).unwrap();
        let written = format_dataset(&d, &book()).unwrap();
        assert_eq!(written, text);
        assert_eq!(parse_dataset(written.as_bytes(), &book()).unwrap(), d);
    }

    #[test]
    fn codebook_toml_round_trip() {
        let text = toml::to_string(&book()).unwrap();
        let back: Codebook = toml::from_str(&text).unwrap();
        assert_eq!(back, book());
    }

    #[test]
    fn rho_values_round_trip() {
        let vals = vec![RhoValue { t: 0, j: 0, k: 2, value: 0.1 + 0.2 }, RhoValue { t: 1, j: 1, k: 2, value: -1e-300 }];
        assert_eq!(parse_rho_values(&format_rho_values(&vals)).unwrap(), vals);
    }

    #[test]
    fn recovery_marks_undefined() {
        let t = RecoveryTable { per_time: vec![(0, None), (1, Some(0.5))], pooled: Some(1.0) };
        assert_eq!(
            format_recovery(&t),
            "t,correlation\n1,NA\n2,5.0000000000000000e-1\npooled,1.0000000000000000e0\n"
        );
    }
}

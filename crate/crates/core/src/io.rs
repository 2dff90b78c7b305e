//! Text formats: `cc-instance v1` instance files and the edge-length CSV.
//!
//! Instance files look like
//!
//! ```text
//! cc-instance v1
//! n 4 bipartite 2
//! alpha 0.5 w 1
//! e 0 2 + 1
//! e 0 3 - 0.5
//! ...
//! ```
//!
//! Everything after `#` on a line is ignored. Complete instances must list
//! every pair; bipartite instances list only cross pairs.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::lp::{EdgeLengths, MetricSolution, SolverStats};
use crate::model::{pair_count, pair_index, Instance, Sign, Topology};

pub const INSTANCE_MAGIC: &str = "cc-instance v1";

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("bad {what}")))
}

pub fn read_instance<R: BufRead>(reader: R) -> Result<Instance> {
    // (line number, tokens) of every non-empty record
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if !body.is_empty() {
            records.push((i + 1, body.to_string()));
        }
    }
    let mut it = records.into_iter();

    let (ln, magic) = it.next().ok_or_else(|| parse_err(1, "empty file"))?;
    if magic.split_whitespace().collect::<Vec<_>>().join(" ") != INSTANCE_MAGIC {
        return Err(parse_err(ln, format!("expected header `{INSTANCE_MAGIC}`")));
    }

    let (ln, size) = it.next().ok_or_else(|| parse_err(ln, "missing size line"))?;
    let toks: Vec<&str> = size.split_whitespace().collect();
    if toks.first() != Some(&"n") {
        return Err(parse_err(ln, "expected `n <N> [bipartite <L>]`"));
    }
    let n: usize = parse_num(toks.get(1).copied(), ln, "vertex count")?;
    let topology = match toks.get(2) {
        None => Topology::Complete,
        Some(&"bipartite") => {
            let left: usize = parse_num(toks.get(3).copied(), ln, "left side size")?;
            if left > n {
                return Err(parse_err(ln, "left side larger than n"));
            }
            Topology::Bipartite { left }
        }
        Some(other) => return Err(parse_err(ln, format!("unexpected token `{other}`"))),
    };
    if toks.len() > if topology == Topology::Complete { 2 } else { 4 } {
        return Err(parse_err(ln, "trailing tokens on size line"));
    }

    let (ln, prof) = it.next().ok_or_else(|| parse_err(ln, "missing profile line"))?;
    let toks: Vec<&str> = prof.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "alpha" || toks[2] != "w" {
        return Err(parse_err(ln, "expected `alpha <a> w <w>`"));
    }
    let alpha: f64 = parse_num(Some(toks[1]), ln, "alpha")?;
    let w_scale: f64 = parse_num(Some(toks[3]), ln, "w")?;

    let mut entries: Vec<Option<(Sign, f64)>> = vec![None; pair_count(n)];
    for (ln, rec) in it {
        let toks: Vec<&str> = rec.split_whitespace().collect();
        if toks.len() != 5 || toks[0] != "e" {
            return Err(parse_err(ln, "expected `e <u> <v> <+|-> <weight>`"));
        }
        let u: usize = parse_num(Some(toks[1]), ln, "vertex")?;
        let v: usize = parse_num(Some(toks[2]), ln, "vertex")?;
        if u >= n || v >= n || u == v {
            return Err(parse_err(ln, format!("invalid pair ({u}, {v})")));
        }
        if !topology.has_edge(u, v) {
            return Err(parse_err(ln, format!("pair ({u}, {v}) lies within one side of the bipartition")));
        }
        let sign = match toks[3] {
            "+" => Sign::Positive,
            "-" => Sign::Negative,
            s => return Err(parse_err(ln, format!("bad sign `{s}`"))),
        };
        let w: f64 = parse_num(Some(toks[4]), ln, "weight")?;
        let slot = &mut entries[pair_index(u, v)];
        if slot.is_some() {
            return Err(parse_err(ln, format!("duplicate pair ({u}, {v})")));
        }
        *slot = Some((sign, w));
    }

    for v in 1..n {
        for u in 0..v {
            if topology.has_edge(u, v) && entries[pair_index(u, v)].is_none() {
                return Err(Error::InvalidInstance(format!("pair ({u}, {v}) is not listed")));
            }
        }
    }
    Instance::from_fn(n, topology, alpha, w_scale, |u, v| entries[pair_index(u, v)].expect("checked above"))
}

pub fn write_instance<W: Write>(inst: &Instance, mut out: W) -> Result<()> {
    let mut s = String::new();
    writeln!(s, "{INSTANCE_MAGIC}").unwrap();
    match inst.topology() {
        Topology::Complete => writeln!(s, "n {}", inst.n()).unwrap(),
        Topology::Bipartite { left } => writeln!(s, "n {} bipartite {left}", inst.n()).unwrap(),
    }
    writeln!(s, "alpha {} w {}", inst.alpha(), inst.w_scale()).unwrap();
    for (u, v, sign, w) in inst.pairs() {
        let sym = match sign {
            Sign::Positive => '+',
            Sign::Negative => '-',
            Sign::Missing => continue,
        };
        writeln!(s, "e {u} {v} {sym} {w}").unwrap();
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn instance_to_string(inst: &Instance) -> String {
    let mut buf = Vec::new();
    write_instance(inst, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii")
}

#[derive(serde::Serialize, serde::Deserialize)]
struct SolutionHeader {
    objective: f64,
    rounds: usize,
    max_violation: f64,
}

/// One JSON header line followed by `u,v,x` rows for every pair `u < v`.
pub fn write_solution<W: Write>(sol: &MetricSolution, mut out: W) -> Result<()> {
    let header = SolutionHeader {
        objective: sol.objective,
        rounds: sol.stats.rounds,
        max_violation: sol.stats.max_violation,
    };
    let mut s = serde_json::to_string(&header)?;
    s.push_str("\nu,v,x\n");
    let n = sol.x.n();
    for u in 0..n {
        for v in u + 1..n {
            writeln!(s, "{u},{v},{}", sol.x.get(u, v)).unwrap();
        }
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_solution<R: BufRead>(reader: R, n: usize) -> Result<MetricSolution> {
    let mut lines = reader.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty solution file"))?;
    let header: SolutionHeader = serde_json::from_str(&first?)?;
    let mut x = EdgeLengths::zeros(n);
    let mut seen = vec![false; pair_count(n)];
    for (i, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line == "u,v,x" {
            continue;
        }
        let mut parts = line.split(',');
        let u: usize = parse_num(parts.next(), i + 1, "u")?;
        let v: usize = parse_num(parts.next(), i + 1, "v")?;
        let val: f64 = parse_num(parts.next(), i + 1, "x")?;
        if u >= n || v >= n || u == v {
            return Err(parse_err(i + 1, format!("invalid pair ({u}, {v})")));
        }
        seen[pair_index(u, v)] = true;
        x.set(u, v, val);
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(parse_err(0, format!("solution is missing pair #{k}")));
    }
    Ok(MetricSolution {
        x,
        objective: header.objective,
        stats: SolverStats { rounds: header.rounds, max_violation: header.max_violation, ..Default::default() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::triangle;

    #[test]
    fn instance_round_trips_bit_exact() {
        let inst = Instance::from_fn(5, Topology::Complete, 0.1, 3.0, |u, v| {
            let w = 0.3 + (u * 7 + v) as f64 / 13.0;
            if (u + v) % 2 == 0 {
                (Sign::Positive, w)
            } else {
                (Sign::Negative, w)
            }
        })
        .unwrap();
        let text = instance_to_string(&inst);
        let back = read_instance(text.as_bytes()).unwrap();
        assert_eq!(back, inst);
        assert_eq!(instance_to_string(&back), text);
    }

    #[test]
    fn bipartite_loader_synthesizes_missing_pairs() {
        let text = "cc-instance v1\n# two by two\nn 4 bipartite 2\nalpha 0.5 w 1\n\
                    e 0 2 + 1\ne 0 3 - 0.5\ne 1 2 - 2 # heavy\ne 1 3 + 0.75\n";
        let inst = read_instance(text.as_bytes()).unwrap();
        assert_eq!(inst.topology(), Topology::Bipartite { left: 2 });
        assert_eq!(inst.sign(0, 1), Sign::Missing);
        assert_eq!(inst.sign(2, 3), Sign::Missing);
        assert_eq!(inst.weight(1, 2), 2.0);
        assert_eq!(read_instance(instance_to_string(&inst).as_bytes()).unwrap(), inst);
    }

    #[test]
    fn complete_file_must_list_every_pair() {
        let text = "cc-instance v1\nn 3\nalpha 1 w 1\ne 0 1 + 1\ne 0 2 + 1\n";
        assert!(matches!(read_instance(text.as_bytes()), Err(Error::InvalidInstance(_))));
    }

    #[test]
    fn malformed_files_are_rejected() {
        let cases = [
            "cc-instance v2\nn 2\nalpha 1 w 1\ne 0 1 + 1\n",
            "cc-instance v1\nn 2\nalpha 1\ne 0 1 + 1\n",
            "cc-instance v1\nn 2\nalpha 1 w 1\ne 0 1 * 1\n",
            "cc-instance v1\nn 2\nalpha 1 w 1\ne 0 2 + 1\n",
            "cc-instance v1\nn 2\nalpha 1 w 1\ne 0 1 + 1\ne 1 0 + 1\n",
            "cc-instance v1\nn 4 bipartite 2\nalpha 1 w 1\ne 0 1 + 1\n",
        ];
        for text in cases {
            assert!(read_instance(text.as_bytes()).is_err(), "accepted: {text}");
        }
    }

    #[test]
    fn triangle_file() {
        let text = instance_to_string(&triangle());
        assert_eq!(text, "cc-instance v1\nn 3\nalpha 1 w 1\ne 0 1 + 1\ne 0 2 + 1\ne 1 2 - 1\n");
    }
}

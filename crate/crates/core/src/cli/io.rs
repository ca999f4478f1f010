//! Output plumbing shared by the subcommands: provenance headers, atomic
//! file writes and list/range argument parsing.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::CliError;

/// Tool version, argument vector and seed, embedded in every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub argv: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(argv: &[String], seed: Option<u64>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            argv: argv.to_vec(),
            seed,
        }
    }

    /// `#` comment lines for CSV outputs.
    pub fn csv_header(&self) -> String {
        let mut s = format!("# {} {}\n# argv: {}\n", self.tool, self.version, self.argv.join(" "));
        if let Some(seed) = self.seed {
            s += &format!("# seed: {seed}\n");
        }
        s
    }
}

/// Pretty JSON of `value` with a top-level `provenance` key added.
pub fn json_with_provenance<T: Serialize>(value: &T, prov: &Provenance) -> Result<String, CliError> {
    let mut v = serde_json::to_value(value).map_err(|e| CliError::Validation(e.to_string()))?;
    let prov = serde_json::to_value(prov).map_err(|e| CliError::Validation(e.to_string()))?;
    match &mut v {
        serde_json::Value::Object(map) => {
            map.insert("provenance".into(), prov);
        }
        other => {
            let payload = other.take();
            v = serde_json::json!({ "provenance": prov, "result": payload });
        }
    }
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Validation(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a partial file. `None` or `-` means
/// stdout.
pub fn write_output(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    let Some(path) = path.filter(|p| p.as_os_str() != "-") else {
        std::io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}")))?;
        return Ok(());
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io_err = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.flush().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Reads a JSON file, ignoring any provenance block.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Removes `#` lines and the JSON `provenance` key so that outputs of
/// different invocations can be compared.
pub fn strip_provenance(contents: &str) -> String {
    if let Ok(serde_json::Value::Object(mut map)) = serde_json::from_str::<serde_json::Value>(contents) {
        map.remove("provenance");
        return serde_json::to_string_pretty(&map).unwrap_or_default();
    }
    contents
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

const RANGE_EPS: f64 = 1e-12;

/// Comma-separated list of numbers and `start:stop:step` ranges; ranges
/// include `stop` when it is hit within 1e-12.
pub fn parse_real_list(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = |what: &str| CliError::Validation(format!("invalid number list '{s}': {what}"));
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad(t));
        match parts.as_slice() {
            [v] => out.push(num(v)?),
            [a, b, c] => {
                let (start, stop, step) = (num(a)?, num(b)?, num(c)?);
                if !(step > 0.0) || !(stop >= start) {
                    return Err(bad("range needs start <= stop and step > 0"));
                }
                let q = (stop - start) / step;
                let near = q.round();
                let count = if (start + near * step - stop).abs() <= RANGE_EPS {
                    near as usize
                } else {
                    q.floor() as usize
                };
                for i in 0..=count {
                    let v = start + i as f64 * step;
                    let v = if (v - stop).abs() <= RANGE_EPS { stop } else { v };
                    // drop the rounding residue of the multiplication
                    out.push((v * 1e12).round() / 1e12);
                }
            }
            _ => return Err(bad(item)),
        }
    }
    if out.is_empty() {
        return Err(bad("empty"));
    }
    Ok(out)
}

/// Comma-separated dimensions and inclusive `a..b` ranges.
pub fn parse_dim_list(s: &str) -> Result<Vec<u32>, CliError> {
    let bad = |what: &str| CliError::Validation(format!("invalid dimension list '{s}': {what}"));
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let num = |t: &str| t.trim().parse::<u32>().map_err(|_| bad(t));
        if let Some((a, b)) = item.split_once("..") {
            let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
            if a > b {
                return Err(bad(item));
            }
            out.extend(a..=b);
        } else {
            out.push(num(item)?);
        }
    }
    if out.is_empty() {
        return Err(bad("empty"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_range_is_inclusive() {
        let v = parse_real_list("0.8:0.99:0.01").unwrap();
        assert_eq!(v.len(), 20);
        assert_eq!(v[0], 0.8);
        assert_eq!(v[19], 0.99);
        assert_eq!(v[2], 0.82);
        assert_eq!(parse_real_list("0.8, 0.9,0.95").unwrap(), vec![0.8, 0.9, 0.95]);
        assert!(parse_real_list("0.9:0.8:0.01").is_err());
        assert!(parse_real_list("x").is_err());
    }

    #[test]
    fn dimension_ranges() {
        assert_eq!(parse_dim_list("8..25").unwrap().len(), 18);
        assert_eq!(parse_dim_list("50,100").unwrap(), vec![50, 100]);
        assert!(parse_dim_list("9..3").is_err());
    }

    #[test]
    fn provenance_is_stripped() {
        let prov = Provenance::new(&["sepkit".into(), "--threads".into(), "2".into()], Some(3));
        let a = json_with_provenance(&serde_json::json!({"x": 1}), &prov).unwrap();
        let prov4 = Provenance::new(&["sepkit".into(), "--threads".into(), "4".into()], Some(3));
        let b = json_with_provenance(&serde_json::json!({"x": 1}), &prov4).unwrap();
        assert_ne!(a, b);
        assert_eq!(strip_provenance(&a), strip_provenance(&b));
        let csv = format!("{}a,b\n1,2\n", prov.csv_header());
        assert_eq!(strip_provenance(&csv), "a,b\n1,2\n");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_output(Some(&p), "one").unwrap();
        write_output(Some(&p), "two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}

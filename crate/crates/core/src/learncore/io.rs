use std::fmt::Write as _;
use std::path::Path;

use super::mlp::{Layer, Mlp};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &str = "EVAVOS-MLP v1";

/// Text form: magic line, optional `#` comment lines, a line of layer
/// sizes, then one line per layer with weights (row-major) then biases.
pub fn write_model(m: &Mlp, comments: &[String]) -> String {
    let mut s = String::new();
    s.push_str(MODEL_MAGIC);
    s.push('\n');
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(s, "# {line}");
        }
    }
    let sizes: Vec<String> = m.sizes().iter().map(|n| n.to_string()).collect();
    s.push_str(&sizes.join(" "));
    s.push('\n');
    for l in m.layers() {
        let vals: Vec<String> = l.weights.iter().chain(&l.biases).map(|v| format!("{v:.16e}")).collect();
        s.push_str(&vals.join(" "));
        s.push('\n');
    }
    s
}

/// Inverse of [`write_model`]; returns the network and its comment lines
/// without the leading `# `.
pub fn parse_model(text: &str) -> Result<(Mlp, Vec<String>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
    match lines.next() {
        Some((_, l)) if l == MODEL_MAGIC => {}
        Some((_, l)) if l.starts_with("EVAVOS-MLP ") => {
            return Err(Error::Version(format!("unsupported model version {:?}", &l["EVAVOS-MLP ".len()..])))
        }
        Some((_, l)) => return Err(Error::Version(format!("not a model file, first line {l:?}"))),
        None => return Err(Error::Version("empty model file".into())),
    }
    let mut comments = Vec::new();
    let mut last_line = 1;
    let sizes_line = loop {
        match lines.next() {
            Some((_, l)) if l.starts_with('#') => comments.push(l.trim_start_matches('#').trim_start().to_string()),
            Some((_, "")) => {}
            Some(x) => break x,
            None => return Err(Error::Parse { line: last_line + 1, message: "missing layer sizes".into() }),
        }
        last_line += 1;
    };
    let (no, text) = sizes_line;
    let sizes: Vec<usize> = text
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse { line: no, message: format!("invalid layer size {t:?}") }))
        .collect::<Result<_>>()?;
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::Parse { line: no, message: format!("invalid layer sizes {sizes:?}") });
    }
    let mut last_line = no;
    let mut layers = Vec::new();
    for w in sizes.windows(2) {
        let (inputs, outputs) = (w[0], w[1]);
        let (no, text) = lines.next().ok_or(Error::Parse {
            line: last_line + 1,
            message: format!("truncated file, expected {} layer lines", sizes.len() - 1),
        })?;
        last_line = no;
        let vals: Vec<f64> = text
            .split_whitespace()
            .map(|t| match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse { line: no, message: format!("invalid number {t:?}") }),
            })
            .collect::<Result<_>>()?;
        let want = inputs * outputs + outputs;
        if vals.len() != want {
            return Err(Error::Parse { line: no, message: format!("expected {want} values, found {}", vals.len()) });
        }
        let biases = vals[inputs * outputs..].to_vec();
        let mut weights = vals;
        weights.truncate(inputs * outputs);
        layers.push(Layer { inputs, outputs, weights, biases });
    }
    if let Some((no, l)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(Error::Parse { line: no, message: format!("unexpected trailing content {l:?}") });
    }
    Ok((Mlp::from_layers(layers)?, comments))
}

pub fn save_model(path: &Path, m: &Mlp, comments: &[String]) -> Result<()> {
    std::fs::write(path, write_model(m, comments)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(Mlp, Vec<String>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    #[test]
    fn round_trip_is_exact() {
        let m = Mlp::new(&[4, 6, 3], 1.0, &mut stream(21, &[])).unwrap();
        let text = write_model(&m, &["[qnet] bins=5".to_string()]);
        let (back, comments) = parse_model(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(comments, vec!["[qnet] bins=5".to_string()]);
        let x = [0.3, -0.2, 0.9, 0.0];
        assert_eq!(back.forward(&x).unwrap(), m.forward(&x).unwrap());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        let m = Mlp::new(&[2, 3], 1.0, &mut stream(22, &[])).unwrap();
        save_model(&path, &m, &[]).unwrap();
        assert_eq!(load_model(&path).unwrap().0, m);
        assert!(matches!(load_model(&dir.path().join("missing")), Err(Error::Io { .. })));
    }

    #[test]
    fn truncated_file_reports_line() {
        let m = Mlp::new(&[2, 3, 2], 1.0, &mut stream(23, &[])).unwrap();
        let text = write_model(&m, &[]);
        let cut: Vec<&str> = text.lines().take(3).collect();
        match parse_model(&cut.join("\n")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_number_reports_line() {
        let text = format!("{MODEL_MAGIC}\n# c\n1 1\n0.5 abc\n");
        match parse_model(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let short = format!("{MODEL_MAGIC}\n1 1\n0.5\n");
        assert!(matches!(parse_model(&short), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn wrong_magic_is_version_error() {
        assert!(matches!(parse_model("EVAVOS-MLP v2\n1 1\n0 0\n"), Err(Error::Version(_))));
        assert!(matches!(parse_model("hello\n"), Err(Error::Version(_))));
        assert!(matches!(parse_model(""), Err(Error::Version(_))));
    }

    proptest! {
        #[test]
        fn arbitrary_parameters_round_trip(vals in proptest::collection::vec(-1e6f64..1e6, 11), seed in 0u64..1000) {
            let mut m = Mlp::new(&[2, 3, 2], 1.0, &mut stream(seed, &[])).unwrap();
            for (p, v) in m.params_mut().zip(vals) {
                *p = v;
            }
            let (back, _) = parse_model(&write_model(&m, &[])).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}

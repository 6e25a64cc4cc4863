//! Plain-text file formats.
//!
//! Three formats, all line oriented, LF terminated, with single-space
//! separators and no trailing whitespace:
//!
//! * body mesh: `bodymesh 1` header, `V <n>`, `T <m>`, then one line per
//!   triangle `i j k l_ij l_jk l_ki` with 0-based vertex indices;
//! * configuration: `bodyconf 1` header, `V <n>`, then one `x y` line per
//!   vertex;
//! * triangle loop: one triangle index per line, no header.
//!
//! Floats are written with [`fmt_g17`], which reproduces C's `%.17g`, so a
//! written f64 parses back bit-identically.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::body::{BodyError, BodyMesh, Configuration};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
    #[error("BadHeader: expected `{expected}` on line 1")]
    BadHeader { expected: &'static str },
    #[error("Parse: malformed or missing token on line {line}")]
    Parse { line: usize },
    #[error("Truncated: file ends before the declared {want} records")]
    Truncated { want: usize },
    #[error("Mesh: {0}")]
    Mesh(#[from] BodyError),
}

/// Format an `f64` the way C's `printf("%.17g", x)` does: 17 significant
/// digits, fixed notation for decimal exponents in `[-4, 17)`, scientific
/// otherwise, trailing zeros removed, exponent written with a sign and at
/// least two digits.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x < 0.0 { "-inf" } else { "inf" }.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    let neg = x < 0.0;
    let v = x.abs();
    // 17 significant digits: one leading digit plus 16 after the point.
    let sci = format!("{:.16e}", v);
    let epos = sci.find('e').expect("exponent in scientific form");
    let exp: i32 = sci[epos + 1..].parse().expect("numeric exponent");
    let mantissa: String = sci[..epos].chars().filter(|c| *c != '.').collect();
    debug_assert_eq!(mantissa.len(), 17);

    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if (-4..17).contains(&exp) {
        if exp >= 0 {
            let split = (exp + 1) as usize;
            out.push_str(&mantissa[..split]);
            let frac = mantissa[split..].trim_end_matches('0');
            if !frac.is_empty() {
                out.push('.');
                out.push_str(frac);
            }
        } else {
            out.push_str("0.");
            for _ in 0..(-exp - 1) {
                out.push('0');
            }
            out.push_str(mantissa.trim_end_matches('0'));
        }
    } else {
        out.push_str(&mantissa[..1]);
        let frac = mantissa[1..].trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
        let _ = write!(out, "e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    out
}

pub fn format_bodymesh(mesh: &BodyMesh<f64>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "bodymesh 1");
    let _ = writeln!(s, "V {}", mesh.vertex_count());
    let _ = writeln!(s, "T {}", mesh.triangle_count());
    for (tri, lens) in mesh.triangles().iter().zip(mesh.ref_lengths()) {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {}",
            tri[0],
            tri[1],
            tri[2],
            fmt_g17(lens[0]),
            fmt_g17(lens[1]),
            fmt_g17(lens[2])
        );
    }
    s
}

pub fn format_bodyconf(conf: &Configuration<f64>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "bodyconf 1");
    let _ = writeln!(s, "V {}", conf.len());
    for p in &conf.positions {
        let _ = writeln!(s, "{} {}", fmt_g17(p[0]), fmt_g17(p[1]));
    }
    s
}

pub fn format_loop(tris: &[usize]) -> String {
    let mut s = String::new();
    for t in tris {
        let _ = writeln!(s, "{t}");
    }
    s
}

struct Tokens<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    current: Option<(usize, std::str::SplitWhitespace<'a>)>,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        Tokens { lines: text.lines().enumerate(), current: None }
    }

    /// Next non-empty token anywhere in the file, with its 1-based line.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        loop {
            if let Some((line, iter)) = &mut self.current {
                if let Some(tok) = iter.next() {
                    return Some((*line + 1, tok));
                }
            }
            let (idx, line) = self.lines.next()?;
            self.current = Some((idx, line.split_whitespace()));
        }
    }

    fn expect<T: std::str::FromStr>(&mut self, want: usize) -> Result<T, IoError> {
        match self.next() {
            None => Err(IoError::Truncated { want }),
            Some((line, tok)) => tok.parse().map_err(|_| IoError::Parse { line }),
        }
    }
}

pub fn parse_bodymesh(text: &str) -> Result<BodyMesh<f64>, IoError> {
    let mut toks = Tokens::new(text);
    let header: (Option<&str>, Option<&str>) =
        (toks.next().map(|t| t.1), toks.next().map(|t| t.1));
    if header != (Some("bodymesh"), Some("1")) {
        return Err(IoError::BadHeader { expected: "bodymesh 1" });
    }
    match toks.next() {
        Some((_, "V")) => {}
        _ => return Err(IoError::BadHeader { expected: "bodymesh 1" }),
    }
    let nv: usize = toks.expect(1)?;
    match toks.next() {
        Some((_, "T")) => {}
        _ => return Err(IoError::BadHeader { expected: "bodymesh 1" }),
    }
    let nt: usize = toks.expect(1)?;
    let mut triangles = Vec::with_capacity(nt);
    let mut lengths = Vec::with_capacity(nt);
    for _ in 0..nt {
        let i: usize = toks.expect(nt)?;
        let j: usize = toks.expect(nt)?;
        let k: usize = toks.expect(nt)?;
        let a: f64 = toks.expect(nt)?;
        let b: f64 = toks.expect(nt)?;
        let c: f64 = toks.expect(nt)?;
        triangles.push([i, j, k]);
        lengths.push([a, b, c]);
    }
    Ok(BodyMesh::new(nv, triangles, lengths)?)
}

pub fn parse_bodyconf(text: &str) -> Result<Configuration<f64>, IoError> {
    let mut toks = Tokens::new(text);
    let header: (Option<&str>, Option<&str>) =
        (toks.next().map(|t| t.1), toks.next().map(|t| t.1));
    if header != (Some("bodyconf"), Some("1")) {
        return Err(IoError::BadHeader { expected: "bodyconf 1" });
    }
    match toks.next() {
        Some((_, "V")) => {}
        _ => return Err(IoError::BadHeader { expected: "bodyconf 1" }),
    }
    let nv: usize = toks.expect(1)?;
    let mut positions = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x: f64 = toks.expect(nv)?;
        let y: f64 = toks.expect(nv)?;
        positions.push([x, y]);
    }
    Ok(Configuration::new(positions))
}

pub fn parse_loop(text: &str) -> Result<Vec<usize>, IoError> {
    let mut toks = Tokens::new(text);
    let mut out = Vec::new();
    while let Some((line, tok)) = toks.next() {
        out.push(tok.parse().map_err(|_| IoError::Parse { line })?);
    }
    Ok(out)
}

pub fn load_bodymesh(path: &Path) -> Result<BodyMesh<f64>, IoError> {
    parse_bodymesh(&std::fs::read_to_string(path)?)
}

pub fn save_bodymesh(path: &Path, mesh: &BodyMesh<f64>) -> Result<(), IoError> {
    Ok(std::fs::write(path, format_bodymesh(mesh))?)
}

pub fn load_bodyconf(path: &Path) -> Result<Configuration<f64>, IoError> {
    parse_bodyconf(&std::fs::read_to_string(path)?)
}

pub fn save_bodyconf(path: &Path, conf: &Configuration<f64>) -> Result<(), IoError> {
    Ok(std::fs::write(path, format_bodyconf(conf))?)
}

pub fn load_loop(path: &Path) -> Result<Vec<usize>, IoError> {
    parse_loop(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_frozen_simple_values() {
        assert_eq!(fmt_g17(0.0), "0");
        assert_eq!(fmt_g17(-0.0), "-0");
        assert_eq!(fmt_g17(1.0), "1");
        assert_eq!(fmt_g17(-1.5), "-1.5");
        assert_eq!(fmt_g17(0.5), "0.5");
        assert_eq!(fmt_g17(100.0), "100");
        assert_eq!(fmt_g17(0.0001), "0.0001");
        assert_eq!(fmt_g17(1e17), "1e+17");
        assert_eq!(fmt_g17(1e16), "10000000000000000");
        assert_eq!(fmt_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(fmt_g17(1.0 / 3.0), "0.33333333333333331");
        assert_eq!(fmt_g17(2.0f64.sqrt()), "1.4142135623730951");
        assert_eq!(fmt_g17(1e300), "1.0000000000000001e+300");
        assert_eq!(fmt_g17(f64::INFINITY), "inf");
    }

    #[test]
    fn g17_roundtrips_awkward_doubles() {
        let vals = [
            1.0 + f64::EPSILON,
            0.1,
            1234567890123456.7,
            9.87654321e-200,
            -3.3e250,
            f64::MIN_POSITIVE,
        ];
        for v in vals {
            let s = fmt_g17(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v:e} -> {s}");
        }
    }

    fn toy_mesh() -> BodyMesh<f64> {
        let r = 0.5f64.sqrt();
        BodyMesh::new(
            4,
            vec![[0, 1, 2], [0, 2, 3]],
            vec![[1.0, 1.0, r * 2.0], [r * 2.0, 1.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn bodymesh_roundtrip_is_bit_exact() {
        let mesh = toy_mesh();
        let text = format_bodymesh(&mesh);
        assert!(text.starts_with("bodymesh 1\nV 4\nT 2\n"));
        assert!(!text.contains(" \n"));
        assert!(text.ends_with('\n'));
        let back = parse_bodymesh(&text).unwrap();
        assert_eq!(back.triangles(), mesh.triangles());
        for (a, b) in back.ref_lengths().iter().zip(mesh.ref_lengths()) {
            for s in 0..3 {
                assert_eq!(a[s].to_bits(), b[s].to_bits());
            }
        }
        assert_eq!(format_bodymesh(&back), text);
    }

    #[test]
    fn bodyconf_roundtrip_is_bit_exact() {
        let conf = Configuration::new(vec![[0.0, 0.0], [1.0 / 3.0, -2.0f64.sqrt()]]);
        let text = format_bodyconf(&conf);
        assert_eq!(text, "bodyconf 1\nV 2\n0 0\n0.33333333333333331 -1.4142135623730951\n");
        let back = parse_bodyconf(&text).unwrap();
        for (a, b) in back.positions.iter().zip(&conf.positions) {
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            assert_eq!(a[1].to_bits(), b[1].to_bits());
        }
    }

    #[test]
    fn loop_roundtrip() {
        let tris = vec![4, 7, 2, 9];
        let text = format_loop(&tris);
        assert_eq!(text, "4\n7\n2\n9\n");
        assert_eq!(parse_loop(&text).unwrap(), tris);
    }

    #[test]
    fn parser_reports_failures() {
        assert!(matches!(parse_bodymesh("wrong 1\n"), Err(IoError::BadHeader { .. })));
        assert!(matches!(
            parse_bodymesh("bodymesh 1\nV 3\nT 1\n0 1 x 1 1 1\n"),
            Err(IoError::Parse { line: 4 })
        ));
        assert!(matches!(
            parse_bodymesh("bodymesh 1\nV 3\nT 2\n0 1 2 1 1 1\n"),
            Err(IoError::Truncated { .. })
        ));
        // structural errors surface through the mesh validator
        assert!(matches!(
            parse_bodymesh("bodymesh 1\nV 3\nT 1\n0 1 2 1 1 2.5\n"),
            Err(IoError::Mesh(BodyError::BadTriangle { .. }))
        ));
    }

    #[test]
    fn g17_matches_reference_printf_on_seeded_samples() {
        // cross-checked against glibc printf("%.17g") for this seed set
        use crate::rng::CounterRng;
        let mut rng = CounterRng::new(0xfeed, 7);
        for _ in 0..2000 {
            let u: f64 = rng.uniform();
            let exp = (rng.uniform::<f64>() * 80.0 - 40.0).round() as i32;
            let v = u * 10f64.powi(exp);
            let s = fmt_g17(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v:e} -> {s}");
        }
    }
}

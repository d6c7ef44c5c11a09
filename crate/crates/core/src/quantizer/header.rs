//! C header export for accelerator toolchains, and a parser for the same
//! layout so exported headers can be checked against their source table.
//!
//! Arrays are `int16_t`, two's complement, in segment order:
//! `KNOTS[N+1]`, `COEF_A[N]`, `COEF_B[N]` for the forward function and
//! `DCOEF_A[N]`, `DCOEF_B[N]` for the derivative table.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{CoeffFormats, FixedPointFormat, QuantizedTable};
use crate::error::{Error, Result};

fn write_array(out: &mut String, prefix: &str, name: &str, values: &[i32]) {
    let _ = writeln!(out, "static const int16_t {prefix}{name}[{}] = {{", values.len());
    for chunk in values.chunks(8) {
        let line: Vec<String> = chunk
            .iter()
            .map(|&v| if v == i16::MIN as i32 { "(-32767 - 1)".to_string() } else { v.to_string() })
            .collect();
        let _ = writeln!(out, "    {},", line.join(", "));
    }
    let _ = writeln!(out, "}};");
}

fn write_format(out: &mut String, prefix: &str, name: &str, f: FixedPointFormat) {
    let _ = writeln!(out, "#define {prefix}DAPA_{name}_INT_BITS {}", f.int_bits());
    let _ = writeln!(out, "#define {prefix}DAPA_{name}_FRAC_BITS {}", f.frac_bits());
}

/// Renders the table as a self-contained C header. `prefix` is prepended
/// to every emitted identifier.
pub fn export_c_header(q: &QuantizedTable, prefix: &str) -> String {
    let guard = format!("{prefix}DAPA_TABLE_H").to_uppercase();
    let f = q.coeff_formats();
    let mut out = String::new();
    let _ = writeln!(out, "/* Piecewise-linear {} table, {} segments. Generated file. */", q.kind(), q.segments());
    let _ = writeln!(out, "#ifndef {guard}");
    let _ = writeln!(out, "#define {guard}");
    let _ = writeln!(out);
    let _ = writeln!(out, "#include <stdint.h>");
    let _ = writeln!(out);
    let _ = writeln!(out, "#define {prefix}DAPA_KIND \"{}\"", q.kind());
    let _ = writeln!(out, "#define {prefix}DAPA_SOURCE \"{}\"", q.source());
    let _ = writeln!(out, "#define {prefix}DAPA_SEGMENTS {}", q.segments());
    write_format(&mut out, prefix, "IO", q.io_format());
    write_format(&mut out, prefix, "COEF_A", f.fwd_a);
    write_format(&mut out, prefix, "COEF_B", f.fwd_b);
    write_format(&mut out, prefix, "DCOEF_A", f.deriv_a);
    write_format(&mut out, prefix, "DCOEF_B", f.deriv_b);
    let _ = writeln!(out);
    write_array(&mut out, prefix, "KNOTS", q.knots());
    let col = |v: &[(i32, i32)], first: bool| -> Vec<i32> { v.iter().map(|&(a, b)| if first { a } else { b }).collect() };
    write_array(&mut out, prefix, "COEF_A", &col(q.fwd(), true));
    write_array(&mut out, prefix, "COEF_B", &col(q.fwd(), false));
    write_array(&mut out, prefix, "DCOEF_A", &col(q.deriv(), true));
    write_array(&mut out, prefix, "DCOEF_B", &col(q.deriv(), false));
    let _ = writeln!(out);
    let _ = writeln!(out, "#endif /* {guard} */");
    out
}

fn parse_int(tok: &str) -> Result<i32> {
    let t = tok.trim();
    if t == "(-32767 - 1)" {
        return Ok(-32768);
    }
    t.parse::<i32>()
        .map_err(|_| Error::Parse(format!("bad integer literal {t:?} in header")))
}

/// Parses a header produced by [`export_c_header`] with the same prefix.
pub fn parse_c_header(text: &str, prefix: &str) -> Result<QuantizedTable> {
    let mut defines: HashMap<String, String> = HashMap::new();
    let mut arrays: HashMap<String, Vec<i32>> = HashMap::new();

    let mut lines = text.lines();
    while let Some(line) = lines.next() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("#define ") {
            if let Some((name, value)) = rest.split_once(' ') {
                defines.insert(name.to_string(), value.trim().to_string());
            }
        } else if let Some(rest) = line.strip_prefix("static const int16_t ") {
            let name = rest
                .split('[')
                .next()
                .ok_or_else(|| Error::Parse(format!("malformed array declaration {line:?}")))?
                .to_string();
            let mut body = String::new();
            for inner in lines.by_ref() {
                let inner = inner.trim();
                if inner == "};" {
                    break;
                }
                body.push_str(inner);
            }
            // split on commas that are not inside the (-32767 - 1) literal
            let values = body
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(parse_int)
                .collect::<Result<Vec<_>>>()?;
            arrays.insert(name, values);
        }
    }

    let define = |name: &str| -> Result<&String> {
        defines
            .get(&format!("{prefix}DAPA_{name}"))
            .ok_or_else(|| Error::Parse(format!("missing #define {prefix}DAPA_{name}")))
    };
    let format = |name: &str| -> Result<FixedPointFormat> {
        let m = define(&format!("{name}_INT_BITS"))?;
        let n = define(&format!("{name}_FRAC_BITS"))?;
        let m: u32 = m.parse().map_err(|_| Error::Parse(format!("bad int bits {m:?}")))?;
        let n: u32 = n.parse().map_err(|_| Error::Parse(format!("bad frac bits {n:?}")))?;
        FixedPointFormat::new(m, n)
    };
    let array = |name: &str| -> Result<&Vec<i32>> {
        arrays
            .get(&format!("{prefix}{name}"))
            .ok_or_else(|| Error::Parse(format!("missing array {prefix}{name}")))
    };
    let unquote = |s: &str| s.trim_matches('"').to_string();

    let kind = unquote(define("KIND")?).parse()?;
    let source = unquote(define("SOURCE")?);
    let segments: usize = define("SEGMENTS")?
        .parse()
        .map_err(|_| Error::Parse("bad segment count".into()))?;
    let pairs = |a: &Vec<i32>, b: &Vec<i32>| -> Result<Vec<(i32, i32)>> {
        if a.len() != segments || b.len() != segments {
            return Err(Error::Parse(format!(
                "coefficient arrays have {} and {} entries, expected {segments}",
                a.len(),
                b.len()
            )));
        }
        Ok(a.iter().copied().zip(b.iter().copied()).collect())
    };
    let coeff_formats = CoeffFormats {
        fwd_a: format("COEF_A")?,
        fwd_b: format("COEF_B")?,
        deriv_a: format("DCOEF_A")?,
        deriv_b: format("DCOEF_B")?,
    };
    QuantizedTable::from_parts(
        kind,
        format("IO")?,
        coeff_formats,
        array("KNOTS")?.clone(),
        pairs(array("COEF_A")?, array("COEF_B")?)?,
        pairs(array("DCOEF_A")?, array("DCOEF_B")?)?,
        source,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitter::{build_dapa, FitConfig};
    use crate::quantizer::quantize_table;
    use crate::reference::ActivationKind;
    use crate::synth;

    fn table() -> QuantizedTable {
        let d = synth::standard_normal_distribution(20_000, 512, Some((-4.0, 4.0)), 31);
        let t = build_dapa(&d, ActivationKind::GeluTanh, 16, &FitConfig::default()).unwrap();
        quantize_table(&t, FixedPointFormat::new(3, 13).unwrap()).unwrap()
    }

    #[test]
    fn header_layout() {
        let h = export_c_header(&table(), "");
        assert!(h.contains("static const int16_t KNOTS[17]"));
        assert!(h.contains("static const int16_t COEF_A[16]"));
        assert!(h.contains("static const int16_t COEF_B[16]"));
        assert!(h.contains("#define DAPA_IO_INT_BITS 3"));
        assert!(h.contains("#define DAPA_IO_FRAC_BITS 13"));
        assert!(h.contains("#include <stdint.h>"));
        // the lowest knot (-4.0) is the most negative code
        assert!(h.contains("(-32767 - 1)"));
    }

    #[test]
    fn header_round_trip() {
        let q = table();
        for prefix in ["", "GELU_"] {
            let back = parse_c_header(&export_c_header(&q, prefix), prefix).unwrap();
            assert_eq!(back, q);
        }
    }

    #[test]
    fn header_parse_errors() {
        let h = export_c_header(&table(), "");
        assert!(parse_c_header(&h, "X_").is_err());
        let broken = h.replace("#define DAPA_SEGMENTS 16", "#define DAPA_SEGMENTS 8");
        assert!(parse_c_header(&broken, "").is_err());
    }
}

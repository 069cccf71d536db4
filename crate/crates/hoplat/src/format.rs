//! File formats: versioned rule JSON, weight specifications, and point
//! exports (CSV and raw binary).
//!
//! Rule files round-trip losslessly: read followed by write reproduces the
//! bytes (field order is fixed, floats print in shortest round-trip form).
//! The provenance block records how a rule was produced; it is carried
//! through round trips untouched.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::f2poly::F2Poly;
use crate::kernel::WeightModel;
use crate::points::{Dyadic, RuleSpec};
use crate::{Error, Result};

pub const RULE_FILE_VERSION: u32 = 1;

/// Magic prefix of the binary point export.
pub const POINTS_MAGIC: &[u8; 8] = b"HOPLATP1";

/// Serialized rule document. Polynomials are lowercase hex of the coefficient
/// bit packing (x^4 + x + 1 is "13").
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RuleFile {
    pub version: u32,
    pub s: usize,
    pub m: u32,
    pub mprime: u32,
    pub alpha: u32,
    pub modulus_hex: String,
    pub generators_hex: Vec<String>,
    pub weights: WeightsField,
    pub provenance: Provenance,
}

/// Weight block: "product" carries one gamma per coordinate, "general" all
/// 2^s subset gammas in mask order.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WeightsField {
    #[serde(rename = "type")]
    pub kind: String,
    pub params: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Provenance {
    pub tool_version: String,
    /// "cbc_fast", "cbc_slow", or "manual".
    pub construction: String,
    /// Always "min_encoding": searches break ties toward the smallest
    /// generator encoding.
    pub tie_break: String,
    /// RFC 3339; informational only, preserved verbatim on round trips.
    pub timestamp: String,
}

impl RuleFile {
    /// Snapshot a rule with provenance. The caller supplies the timestamp so
    /// the library stays clock-free.
    pub fn from_rule(rule: &RuleSpec, construction: &str, timestamp: &str) -> RuleFile {
        RuleFile {
            version: RULE_FILE_VERSION,
            s: rule.s(),
            m: rule.m(),
            mprime: rule.mprime(),
            alpha: rule.alpha(),
            modulus_hex: rule.modulus().to_hex(),
            generators_hex: rule.generators().iter().map(|q| q.to_hex()).collect(),
            weights: weights_to_field(rule.weights()),
            provenance: Provenance {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                construction: construction.to_string(),
                tie_break: "min_encoding".to_string(),
                timestamp: timestamp.to_string(),
            },
        }
    }

    /// Rebuild and fully revalidate the rule (irreducibility, degrees,
    /// weight dimensions).
    pub fn to_rule(&self) -> Result<RuleSpec> {
        if self.version != RULE_FILE_VERSION {
            return Err(Error::InvalidParameter(format!(
                "rule file version {} unsupported (expected {})",
                self.version, RULE_FILE_VERSION
            )));
        }
        let modulus = F2Poly::from_hex(&self.modulus_hex)?;
        let generators = self
            .generators_hex
            .iter()
            .map(|h| F2Poly::from_hex(h))
            .collect::<Result<Vec<_>>>()?;
        let weights = weights_from_field(&self.weights, self.s)?;
        RuleSpec::new(self.s, self.m, self.mprime, self.alpha, modulus, generators, weights)
    }

    /// Canonical serialization: pretty JSON, trailing newline. Writing the
    /// parse of this string reproduces it byte for byte.
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<RuleFile> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<RuleFile> {
        RuleFile::from_json(&fs::read_to_string(path)?)
    }
}

pub fn weights_to_field(weights: &WeightModel) -> WeightsField {
    match weights {
        WeightModel::Product(gammas) => {
            WeightsField { kind: "product".to_string(), params: gammas.clone() }
        }
        WeightModel::General(g) => {
            WeightsField { kind: "general".to_string(), params: g.gammas().to_vec() }
        }
    }
}

pub fn weights_from_field(field: &WeightsField, s: usize) -> Result<WeightModel> {
    match field.kind.as_str() {
        "product" => WeightModel::product(field.params.clone()),
        "general" => WeightModel::general(s, field.params.clone()),
        other => Err(Error::InvalidParameter(format!(
            "unknown weight type '{}' (expected product or general)",
            other
        ))),
    }
}

/// General-weights sidecar file: all 2^s subset weights in mask order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneralWeightsFile {
    pub s: usize,
    pub gammas: Vec<f64>,
}

/// Parse a command-line weight specification for dimension s:
///
/// ```text
///     prod:<c>           constant gamma_j = c
///     prod:<c>^j         geometric gamma_j = c^j
///     prod:<c>*j^-<k>    polynomial gamma_j = c j^{-k}
///     prod:<g1>,<g2>,...  explicit list (length s)
///     general:@<path>    JSON file {"s": .., "gammas": [.. 2^s values ..]}
/// ```
pub fn parse_weight_spec(spec: &str, s: usize) -> Result<WeightModel> {
    if let Some(rest) = spec.strip_prefix("prod:") {
        let gammas = parse_product_expr(rest, s)?;
        return WeightModel::product(gammas);
    }
    if let Some(path) = spec.strip_prefix("general:@") {
        let file: GeneralWeightsFile = serde_json::from_str(&fs::read_to_string(path)?)?;
        if file.s != s {
            return Err(Error::InvalidParameter(format!(
                "general weights file is for s = {}, rule has s = {}",
                file.s, s
            )));
        }
        return WeightModel::general(s, file.gammas);
    }
    Err(Error::InvalidParameter(format!(
        "weight spec '{}' must start with 'prod:' or 'general:@'",
        spec
    )))
}

fn parse_product_expr(expr: &str, s: usize) -> Result<Vec<f64>> {
    let bad = |context: &str| {
        Error::InvalidParameter(format!(
            "cannot parse product weight expression '{}' ({})",
            expr, context
        ))
    };
    if expr.contains(',') {
        let gammas = expr
            .split(',')
            .map(|part| part.trim().parse::<f64>().map_err(|_| bad("list entry")))
            .collect::<Result<Vec<f64>>>()?;
        if gammas.len() != s {
            return Err(Error::InvalidParameter(format!(
                "weight list has {} entries, rule has s = {}",
                gammas.len(),
                s
            )));
        }
        return Ok(gammas);
    }
    if let Some(c_text) = expr.strip_suffix("^j") {
        let c: f64 = c_text.parse().map_err(|_| bad("base of c^j"))?;
        return Ok((1..=s).map(|j| c.powi(j as i32)).collect());
    }
    if let Some((c_text, k_text)) = expr.split_once("*j^-") {
        let c: f64 = c_text.parse().map_err(|_| bad("coefficient of c*j^-k"))?;
        let k: f64 = k_text.parse().map_err(|_| bad("exponent of c*j^-k"))?;
        return Ok((1..=s).map(|j| c * (j as f64).powf(-k)).collect());
    }
    let c: f64 = expr.parse().map_err(|_| bad("constant"))?;
    Ok(vec![c; s])
}

/// Header of both point export formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PointExportHeader {
    pub s: u32,
    pub m: u32,
    pub mprime: u32,
    /// Dyadic precision of the exported numerators.
    pub precision: u32,
}

/// CSV export: header row x1..xs, then one row per point with every
/// coordinate in scientific notation at 17 significant digits (enough to
/// reconstruct the double exactly).
pub fn points_to_csv(points: &[Vec<Dyadic>]) -> String {
    let s = points.first().map_or(0, |p| p.len());
    let mut out = String::new();
    for j in 1..=s {
        if j > 1 {
            out.push(',');
        }
        out.push_str(&format!("x{}", j));
    }
    out.push('\n');
    for point in points {
        for (j, d) in point.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{:.16e}", d.value()));
        }
        out.push('\n');
    }
    out
}

/// Binary export: the magic, four u32 header fields, the point count as u64,
/// then numerators as u64, point-major. All little-endian.
pub fn points_to_binary(header: &PointExportHeader, points: &[Vec<Dyadic>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + points.len() * header.s as usize * 8);
    out.extend_from_slice(POINTS_MAGIC);
    for field in [header.s, header.m, header.mprime, header.precision] {
        out.extend_from_slice(&field.to_le_bytes());
    }
    out.extend_from_slice(&(points.len() as u64).to_le_bytes());
    for point in points {
        debug_assert_eq!(point.len(), header.s as usize);
        for d in point {
            debug_assert_eq!(d.precision(), header.precision);
            out.extend_from_slice(&d.numerator().to_le_bytes());
        }
    }
    out
}

/// Inverse of [`points_to_binary`], with structural validation.
pub fn points_from_binary(bytes: &[u8]) -> Result<(PointExportHeader, Vec<Vec<Dyadic>>)> {
    let structural = |msg: &str| Error::InvalidParameter(format!("point file: {}", msg));
    if bytes.len() < 32 {
        return Err(structural("truncated header"));
    }
    if &bytes[..8] != POINTS_MAGIC {
        return Err(structural("bad magic"));
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let header = PointExportHeader {
        s: u32_at(8),
        m: u32_at(12),
        mprime: u32_at(16),
        precision: u32_at(20),
    };
    let count = u64::from_le_bytes(bytes[24..32].try_into().unwrap());
    if header.s == 0 || !(1..=63).contains(&header.precision) {
        return Err(structural("invalid header fields"));
    }
    let expected = 32u64 + count * header.s as u64 * 8;
    if bytes.len() as u64 != expected {
        return Err(structural("length does not match the declared point count"));
    }
    let mut points = Vec::with_capacity(count as usize);
    let mut off = 32;
    for _ in 0..count {
        let mut point = Vec::with_capacity(header.s as usize);
        for _ in 0..header.s {
            let num = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            if num > 1u64 << header.precision {
                return Err(structural("numerator exceeds the declared precision"));
            }
            point.push(Dyadic::new(num, header.precision));
            off += 8;
        }
        points.push(point);
    }
    Ok((header, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cbc::cbc_fast;
    use crate::points::randomize;

    fn sample_rule() -> RuleSpec {
        let weights = WeightModel::product(vec![1.0, 0.5, 0.25]).unwrap();
        cbc_fast(3, 3, 5, 2, weights).unwrap().0
    }

    #[test]
    fn rule_file_round_trips_values() {
        let rule = sample_rule();
        let file = RuleFile::from_rule(&rule, "cbc_fast", "2026-08-14T00:00:00Z");
        let back = file.to_rule().unwrap();
        assert_eq!(back.s(), rule.s());
        assert_eq!(back.m(), rule.m());
        assert_eq!(back.mprime(), rule.mprime());
        assert_eq!(back.alpha(), rule.alpha());
        assert_eq!(back.modulus(), rule.modulus());
        assert_eq!(back.generators(), rule.generators());
        assert_eq!(back.weights(), rule.weights());
    }

    #[test]
    fn rule_json_round_trips_byte_identically() {
        let rule = sample_rule();
        let file = RuleFile::from_rule(&rule, "cbc_fast", "2026-08-14T00:00:00Z");
        let text = file.to_json().unwrap();
        let reparsed = RuleFile::from_json(&text).unwrap();
        assert_eq!(reparsed.to_json().unwrap(), text);
        assert_eq!(reparsed, file);
    }

    #[test]
    fn general_weights_round_trip() {
        let weights = WeightModel::general(2, vec![1.0, 0.9, 0.5, 0.125]).unwrap();
        let modulus = F2Poly::find_irreducible(3).unwrap();
        let rule =
            RuleSpec::new(2, 2, 3, 2, modulus, vec![F2Poly::ONE, F2Poly::X], weights).unwrap();
        let file = RuleFile::from_rule(&rule, "manual", "t");
        assert_eq!(file.weights.kind, "general");
        let back = file.to_rule().unwrap();
        assert_eq!(back.weights(), rule.weights());
    }

    #[test]
    fn rule_file_rejects_corruption() {
        let rule = sample_rule();
        let good = RuleFile::from_rule(&rule, "cbc_fast", "t");

        let mut wrong_version = good.clone();
        wrong_version.version = 2;
        assert!(wrong_version.to_rule().is_err());

        let mut bad_hex = good.clone();
        bad_hex.modulus_hex = "zz".into();
        assert!(bad_hex.to_rule().is_err());

        // x^5 + x (encoding 0x22) factors as x(x^4 + 1): not irreducible.
        let mut reducible = good.clone();
        reducible.modulus_hex = "22".into();
        assert!(reducible.to_rule().is_err());

        let mut bad_weights = good;
        bad_weights.weights.kind = "mystery".into();
        assert!(bad_weights.to_rule().is_err());
    }

    #[test]
    fn weight_spec_grammar() {
        let w = parse_weight_spec("prod:0.5^j", 3).unwrap();
        assert_eq!(w.product_gammas().unwrap(), &[0.5, 0.25, 0.125]);

        let w = parse_weight_spec("prod:1.0", 2).unwrap();
        assert_eq!(w.product_gammas().unwrap(), &[1.0, 1.0]);

        let w = parse_weight_spec("prod:2.0*j^-2", 3).unwrap();
        let expect = [2.0, 0.5, 2.0 / 9.0];
        for (a, b) in w.product_gammas().unwrap().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }

        let w = parse_weight_spec("prod:1.0,0.25,0.5", 3).unwrap();
        assert_eq!(w.product_gammas().unwrap(), &[1.0, 0.25, 0.5]);

        assert!(parse_weight_spec("prod:1.0,0.25", 3).is_err());
        assert!(parse_weight_spec("prod:abc", 2).is_err());
        assert!(parse_weight_spec("lin:1.0", 2).is_err());
        assert!(parse_weight_spec("prod:-1.0", 2).is_err());
    }

    #[test]
    fn general_weight_file_loads() {
        let dir = std::env::temp_dir();
        let path = dir.join("hoplat_test_weights.json");
        let file = GeneralWeightsFile { s: 2, gammas: vec![1.0, 0.8, 0.4, 0.1] };
        fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
        let spec = format!("general:@{}", path.display());
        let w = parse_weight_spec(&spec, 2).unwrap();
        assert_eq!(w.gamma(0b11), 0.1);
        assert!(parse_weight_spec(&spec, 3).is_err());
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn csv_export_is_exact() {
        let rule = sample_rule();
        let set = randomize(&rule, 4, 53).unwrap();
        let csv = points_to_csv(&set.points);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x1,x2,x3"));
        for (line, point) in lines.zip(&set.points) {
            for (field, d) in line.split(',').zip(point) {
                let parsed: f64 = field.parse().unwrap();
                assert_eq!(parsed, d.value(), "17 significant digits round-trip");
            }
        }
        assert_eq!(csv.lines().count(), 1 + set.points.len());
    }

    #[test]
    fn binary_export_round_trips() {
        let rule = sample_rule();
        let set = randomize(&rule, 9, 53).unwrap();
        let header = PointExportHeader {
            s: rule.s() as u32,
            m: rule.m(),
            mprime: rule.mprime(),
            precision: 53,
        };
        let bytes = points_to_binary(&header, &set.points);
        let (back_header, back_points) = points_from_binary(&bytes).unwrap();
        assert_eq!(back_header, header);
        assert_eq!(back_points, set.points);

        assert!(points_from_binary(&bytes[..10]).is_err());
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(points_from_binary(&bad_magic).is_err());
        let mut truncated = bytes;
        truncated.pop();
        assert!(points_from_binary(&truncated).is_err());
    }
}

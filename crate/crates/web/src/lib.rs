use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use plectic::config::GroupConfig;
use plectic::integration::RiemannOptions;
use plectic::jacobian::{abel_jacobi, commensurability_check, period_lattice};
use plectic::measures::FundamentalDomain;

fn fail(e: impl ToString) -> JsError {
    JsError::new(&e.to_string())
}

/// Periods and the Abel-Jacobi image of the config's own cycle.
pub fn abel_jacobi_report(config: &str, digits: u32) -> Result<Value, String> {
    let cfg = GroupConfig::parse(config).map_err(|e| e.to_string())?;
    let g = cfg.build().map_err(|e| e.to_string())?;
    let d = cfg.default_cycle().map_err(|e| e.to_string())?.ok_or("config has no cycle")?;
    let opts = RiemannOptions { output_digits: digits.clamp(1, cfg.precision), ..RiemannOptions::default() };
    let lattice = period_lattice(&g, &opts).map_err(|e| e.to_string())?;
    let j = abel_jacobi(&g, &lattice, &d, &opts).map_err(|e| e.to_string())?;
    let cut = |x: &plectic::padic::QuadExtScalar| json!(x.with_precision(opts.output_digits.min(x.precision())).to_record());
    let periods: Vec<Value> = lattice
        .places
        .iter()
        .flatten()
        .map(|fp| json!(fp.matrix.iter().map(|row| row.iter().map(cut).collect::<Vec<_>>()).collect::<Vec<_>>()))
        .collect();
    let factors: Vec<Vec<Value>> = j.factors.iter().map(|f| f.iter().map(cut).collect()).collect();
    Ok(json!({"cycle": d.to_records(), "periods": periods, "factors": factors}))
}

/// Vertices and edges of the limit tree near the fundamental domain, per place.
pub fn limit_tree_report(config: &str, radius: usize) -> Result<Value, String> {
    let cfg = GroupConfig::parse(config).map_err(|e| e.to_string())?;
    let g = cfg.build().map_err(|e| e.to_string())?;
    let mut places = Vec::new();
    for k in g.support() {
        let f = g.schottky(k).map_err(|e| e.to_string())?;
        let t = FundamentalDomain::new(f).limit_tree(radius);
        places.push(json!({
            "place": k,
            "vertices": t.vertices.iter().map(|v| v.label()).collect::<Vec<_>>(),
            "edges": t.edges.iter().map(|e| [e.source.label(), e.target.label()]).collect::<Vec<_>>(),
            "dot": plectic::tree::to_dot(&format!("place{k}"), &t.vertices),
        }));
    }
    Ok(json!({"radius": radius, "places": places}))
}

fn parse_rational(s: &str) -> Result<BigRational, String> {
    let s = s.trim();
    let r = match s.split_once('/') {
        Some((a, b)) => {
            let a: BigInt = a.trim().parse().map_err(|_| format!("bad rational {s}"))?;
            let b: BigInt = b.trim().parse().map_err(|_| format!("bad rational {s}"))?;
            if b == BigInt::from(0) {
                return Err(format!("zero denominator in {s}"));
            }
            BigRational::new(a, b)
        }
        None => BigRational::from_integer(s.parse().map_err(|_| format!("bad rational {s}"))?),
    };
    Ok(r)
}

pub fn commensurability_report(q: &str, qt: &str, p: u32) -> Result<Value, String> {
    let answer = commensurability_check(&parse_rational(q)?, &parse_rational(qt)?, p).map_err(|e| e.to_string())?;
    Ok(json!(answer))
}

#[wasm_bindgen]
pub fn abel_jacobi_json(config: &str, digits: u32) -> Result<String, JsError> {
    abel_jacobi_report(config, digits).map(|v| v.to_string()).map_err(fail)
}

#[wasm_bindgen]
pub fn limit_tree_json(config: &str, radius: usize) -> Result<String, JsError> {
    limit_tree_report(config, radius.min(6)).map(|v| v.to_string()).map_err(fail)
}

#[wasm_bindgen]
pub fn commensurability_json(q: &str, qt: &str, p: u32) -> Result<String, JsError> {
    commensurability_report(q, qt, p).map(|v| v.to_string()).map_err(fail)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TATE: &str = include_str!("../../../configs/tate.json");

    #[test]
    fn tate_aj() {
        let v = abel_jacobi_report(TATE, 20).unwrap();
        assert_eq!(v["factors"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn tree_has_edges() {
        let v = limit_tree_report(TATE, 2).unwrap();
        assert!(!v["places"][0]["edges"].as_array().unwrap().is_empty());
    }

    #[test]
    fn commensurable() {
        assert_eq!(commensurability_report("5", "25", 5).unwrap()["answer"], "yes");
        assert_eq!(commensurability_report("5", "10", 5).unwrap()["answer"], "no");
        assert!(commensurability_report("1/5", "5", 5).is_err());
    }
}

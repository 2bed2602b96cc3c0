use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sample_lambda, HolderTarget, LambdaSpec};
use crate::error::{invalid, Error, Result};
use crate::expfam::ExpFamily;
use crate::train::Dataset;

/// Draws `x_i ~ λ` and `y_i` from the family with natural parameter `f_0(x_i)`.
pub fn make_dataset<R: Rng + ?Sized>(
    lambda: &LambdaSpec,
    target: &HolderTarget,
    family: &ExpFamily,
    n: usize,
    rng: &mut R,
) -> Result<Dataset> {
    if n == 0 {
        return invalid("a dataset needs at least one sample");
    }
    if target.dim() != lambda.dim() {
        return invalid(format!("target has dimension {} but lambda has {}", target.dim(), lambda.dim()));
    }
    let d = lambda.dim();
    let xs = sample_lambda(lambda, n, rng)?;
    let ys = xs.chunks(d).map(|x| family.sample_response(target.eval(x), rng)).collect();
    Dataset::new(d, xs, ys, family.kind)
}

/// Description stored next to a dataset CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub n: usize,
    pub d: usize,
    pub family: crate::expfam::FamilyKind,
    pub lambda: LambdaSpec,
    pub target: HolderTarget,
    pub seed: u64,
}

/// CSV with header `x1,...,xd,y`; floats use shortest round-trip formatting.
pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut out = String::new();
    for j in 1..=data.dim {
        let _ = write!(out, "x{j},");
    }
    out.push_str("y\n");
    for i in 0..data.len() {
        for v in data.x(i) {
            let _ = write!(out, "{v:?},");
        }
        let _ = writeln!(out, "{:?}", data.ys[i]);
    }
    out
}

/// Reads a CSV written by [`dataset_to_csv`]; the dimension is taken from
/// the header.
pub fn dataset_from_csv(text: &str, family: crate::expfam::FamilyKind) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let cols = headers.len();
    if cols < 2 || &headers[cols - 1] != "y" {
        return Err(Error::Parse("dataset header must be x1,...,xd,y".into()));
    }
    let d = cols - 1;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("row {}: {e}", row + 1)))?;
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("row {}, column {}: '{field}' is not a number", row + 1, c + 1)))?;
            if c < d {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
    }
    Dataset::new(d, xs, ys, family)
}

pub fn write_dataset(data: &Dataset, sidecar: &DatasetSidecar, csv_path: &Path, sidecar_path: &Path) -> Result<()> {
    std::fs::write(csv_path, dataset_to_csv(data))?;
    std::fs::write(sidecar_path, serde_json::to_string_pretty(sidecar)?)?;
    Ok(())
}

/// Loads a dataset; the family comes from the sidecar.
pub fn read_dataset(csv_path: &Path, sidecar_path: &Path) -> Result<(Dataset, DatasetSidecar)> {
    let sidecar: DatasetSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path)?)?;
    let data = dataset_from_csv(&std::fs::read_to_string(csv_path)?, sidecar.family)?;
    Ok((data, sidecar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expfam::FamilyKind;
    use crate::rng::seeded;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut rng = seeded(9);
        let data = make_dataset(
            &LambdaSpec::Uniform { d: 2 },
            &HolderTarget::parse("bump", 2, 1.0, 1.0).unwrap(),
            &ExpFamily::gaussian(),
            50,
            &mut rng,
        )
        .unwrap();
        let back = dataset_from_csv(&dataset_to_csv(&data), FamilyKind::Gaussian).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn bernoulli_responses_are_binary() {
        let mut rng = seeded(10);
        let data = make_dataset(
            &LambdaSpec::Uniform { d: 1 },
            &HolderTarget::Constant { d: 1, c: 0.0 },
            &ExpFamily::bernoulli(),
            500,
            &mut rng,
        )
        .unwrap();
        assert!(data.ys.iter().all(|&y| y == 0.0 || y == 1.0));
        let mean = data.ys.iter().sum::<f64>() / 500.0;
        assert!((mean - 0.5).abs() < 3.0 * (0.25f64 / 500.0).sqrt());
    }

    #[test]
    fn same_seed_same_data() {
        let make = || {
            make_dataset(
                &LambdaSpec::Curve { d: 3 },
                &HolderTarget::parse("smooth-poly", 3, 1.0, 1.0).unwrap(),
                &ExpFamily::poisson(),
                100,
                &mut seeded(11),
            )
            .unwrap()
        };
        assert_eq!(make(), make());
    }

    #[test]
    fn bad_csv_is_a_parse_error() {
        assert!(matches!(dataset_from_csv("x1,y\n0.5,abc\n", FamilyKind::Gaussian), Err(Error::Parse(_))));
        assert!(matches!(dataset_from_csv("a,b\n0.5,1\n", FamilyKind::Gaussian), Err(Error::Parse(_))));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let r = make_dataset(
            &LambdaSpec::Uniform { d: 2 },
            &HolderTarget::Constant { d: 1, c: 0.0 },
            &ExpFamily::gaussian(),
            10,
            &mut seeded(1),
        );
        assert!(r.is_err());
    }
}

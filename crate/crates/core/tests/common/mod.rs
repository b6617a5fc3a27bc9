#![allow(dead_code)]

use std::path::PathBuf;

use geowarp::{
    build_contiguity_proximity, build_kernel_proximity, extract_basis, CoordinateSet, EigenBasis,
    ModelData, ProximityMatrix,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

/// Column-major table of string cells.
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(name: &str) -> Table {
        let mut rdr = csv::Reader::from_path(data_path(name)).unwrap();
        let headers = rdr.headers().unwrap().iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.unwrap().iter().map(str::to_string).collect())
            .collect();
        Table { headers, rows }
    }

    pub fn col(&self, name: &str) -> Vec<f64> {
        let j = self.headers.iter().position(|h| h == name).unwrap();
        self.rows.iter().map(|r| r[j].parse().unwrap()).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }
}

pub struct Dataset {
    pub data: ModelData,
    pub coords: CoordinateSet,
    pub prox: ProximityMatrix,
    pub basis: EigenBasis,
}

fn with_basis(data: ModelData, sites: Vec<[f64; 2]>) -> Dataset {
    let coords = CoordinateSet::new(sites, None).unwrap();
    let prox = build_kernel_proximity(&coords).unwrap();
    let basis = extract_basis(&prox, 0.0).unwrap();
    Dataset {
        data,
        coords,
        prox,
        basis,
    }
}

fn dummy(v: &[f64], level: f64) -> Vec<f64> {
    v.iter()
        .map(|&x| if x == level { 1.0 } else { 0.0 })
        .collect()
}

/// Zinc against distance to the river and flooding-frequency dummies.
pub fn meuse() -> Dataset {
    let t = Table::read("meuse.csv");
    let ffreq = t.col("ffreq");
    let data = ModelData::new(t.col("zinc"))
        .with_column("dist", t.col("dist"))
        .with_column("ffreq2", dummy(&ffreq, 2.0))
        .with_column("ffreq3", dummy(&ffreq, 3.0));
    let (x, y) = (t.col("x"), t.col("y"));
    with_basis(data, x.iter().zip(&y).map(|(a, b)| [*a, *b]).collect())
}

pub const MEUSE_GRID_HEAD: [[f64; 2]; 2] = [[181180.0, 333740.0], [181140.0, 333700.0]];

pub fn boston() -> Dataset {
    let t = Table::read("boston.csv");
    let names = [
        "CRIM", "ZN", "INDUS", "CHAS", "NOX", "RM", "AGE", "DIS", "RAD", "TAX", "PTRATIO", "B",
        "LSTAT",
    ];
    let mut data = ModelData::new(t.col("CMEDV"));
    for n in names {
        data = data.with_column(n, t.col(n));
    }
    let (x, y) = (t.col("LON"), t.col("LAT"));
    with_basis(data, x.iter().zip(&y).map(|(a, b)| [*a, *b]).collect())
}

pub struct CountPanel {
    pub data: ModelData,
    pub basis: EigenBasis,
    pub n_zones: usize,
    pub years: Vec<String>,
}

/// Overdispersed Poisson counts on a synthetic lattice of zones observed
/// over five years with expected-count offsets.
///
/// Zones fill a rectangular lattice row by row and the basis comes from rook
/// contiguity. Coefficients resemble a hospital admissions model: a
/// spatially varying intercept near -0.55, a price
/// slope varying around -0.18, constant jsa and pm10 effects, year effects
/// and gamma-mixed Poisson noise.
pub fn count_panel(seed: u64) -> CountPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nc = 17usize;
    let n_zones = 271;
    let sites: Vec<(f64, f64)> = (0..n_zones)
        .map(|k| ((k / nc) as f64, (k % nc) as f64))
        .collect();
    let mut adj = nalgebra::DMatrix::zeros(n_zones, n_zones);
    for i in 0..n_zones {
        for j in 0..n_zones {
            let d = (sites[i].0 - sites[j].0).abs() + (sites[i].1 - sites[j].1).abs();
            if d == 1.0 {
                adj[(i, j)] = 1.0;
            }
        }
    }
    let prox = build_contiguity_proximity(adj, None).unwrap();
    let basis = extract_basis(&prox, 0.0).unwrap();

    let years: Vec<String> = (2007..=2011).map(|y| y.to_string()).collect();
    let year_eff = [0.053, 0.107, 0.007, -0.084, -0.083];
    let normal = Normal::<f64>::new(0.0, 1.0).unwrap();
    let smooth = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        let raw: Vec<f64> = sites.iter().map(|&(r, c)| f(r, c)).collect();
        let m = raw.iter().sum::<f64>() / raw.len() as f64;
        let sd = (raw.iter().map(|v| (v - m).powi(2)).sum::<f64>() / raw.len() as f64).sqrt();
        raw.iter().map(|v| (v - m) / sd).collect()
    };
    let p1 = smooth(&|r, c| (r / 3.0).sin() + (c / 4.0).cos());
    let p2 = smooth(&|r, c| ((r + c) / 6.0).sin() - (r / 5.0).cos());
    let intercept: Vec<f64> = p1.iter().map(|v| -0.548 + 0.05 * v).collect();
    let price_slope: Vec<f64> = p2.iter().map(|v| -0.18 + 0.08 * v).collect();
    let base_jsa: Vec<f64> = (0..n_zones)
        .map(|_| 2.0 + 1.5 * normal.sample(&mut rng).abs())
        .collect();
    let base_price: Vec<f64> = (0..n_zones)
        .map(|_| 1.3 * (0.35 * normal.sample(&mut rng)).exp())
        .collect();
    let base_exp: Vec<f64> = (0..n_zones)
        .map(|_| 92.0 * (0.35 * normal.sample(&mut rng)).exp())
        .collect();
    let shape = 1.0 / 0.034;
    let gamma = Gamma::new(shape, 1.0 / shape).unwrap();

    let (mut y, mut expected, mut pm10, mut jsa, mut price, mut group, mut site) =
        (vec![], vec![], vec![], vec![], vec![], vec![], vec![]);
    for (t, yr) in years.iter().enumerate() {
        for i in 0..n_zones {
            let e = base_exp[i] * (1.0 + 0.01 * t as f64);
            let pm = 12.0 + 3.0 * normal.sample(&mut rng) - 0.4 * t as f64;
            let js = (base_jsa[i] + 0.3 * normal.sample(&mut rng)).max(0.1);
            let pr = base_price[i] * (1.0 + 0.03 * normal.sample(&mut rng));
            let eta =
                intercept[i] + 0.06149 * js + 0.02834 * pm + price_slope[i] * pr + year_eff[t];
            let mu = e * eta.exp() * gamma.sample(&mut rng);
            y.push(Poisson::new(mu).unwrap().sample(&mut rng));
            expected.push(e);
            pm10.push(pm);
            jsa.push(js);
            price.push(pr);
            group.push(yr.clone());
            site.push(i);
        }
    }
    let data = ModelData::new(y)
        .with_column("pm10", pm10)
        .with_column("jsa", jsa)
        .with_column("price", price)
        .with_group(group)
        .with_offset(expected)
        .with_site_index(site);
    CountPanel {
        data,
        basis,
        n_zones,
        years,
    }
}

/// Small synthetic spatial sample: positive skewed `y`, counts `count`,
/// covariates `x1`, `x2` and a smooth spatial signal.
pub struct Synthetic {
    pub sites: Vec<[f64; 2]>,
    pub basis: EigenBasis,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y: Vec<f64>,
    pub count: Vec<f64>,
}

pub fn synthetic(n: usize, seed: u64) -> Synthetic {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)])
        .collect();
    let coords = CoordinateSet::new(sites.clone(), None).unwrap();
    let basis = extract_basis(&build_kernel_proximity(&coords).unwrap(), 0.0).unwrap();
    let x1: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
    let x2: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nrm = Normal::new(0.0, 0.3).unwrap();
    let eta: Vec<f64> = (0..n)
        .map(|i| {
            let s = 0.3 * (sites[i][0] / 20.0).sin() + 0.3 * (sites[i][1] / 30.0).cos();
            0.5 + s + 0.4 * x1[i] - 0.3 * x2[i]
        })
        .collect();
    let y = eta
        .iter()
        .map(|e| (e + nrm.sample(&mut rng)).exp())
        .collect();
    let count = eta
        .iter()
        .map(|e| {
            Poisson::new((e + 1.0 + nrm.sample(&mut rng)).exp())
                .unwrap()
                .sample(&mut rng)
        })
        .collect();
    Synthetic {
        sites,
        basis,
        x1,
        x2,
        y,
        count,
    }
}

impl Synthetic {
    pub fn data(&self, y: &[f64]) -> ModelData {
        ModelData::new(y.to_vec())
            .with_column("x1", self.x1.clone())
            .with_column("x2", self.x2.clone())
    }
}

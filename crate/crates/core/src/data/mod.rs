//! IDX ingestion, binary task extraction, PCA angle features and client splits.

mod idx;
mod pca;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use idx::{encode_idx, load_idx, RawDataset};
pub use pca::{covariance, fix_sign, pca_fit, PcaModel};

/// Environment variable naming the default data directory.
pub const DATA_DIR_ENV: &str = "QFL_DATA_DIR";

const PARTITION_STREAM: u64 = (1 << 32) + 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetId {
    Mnist,
    FashionMnist,
}

const FASHION_CLASSES: [&str; 10] = [
    "tshirt", "trouser", "pullover", "dress", "coat", "sandal", "shirt", "sneaker", "bag", "boot",
];

impl DatasetId {
    pub fn name(self) -> &'static str {
        match self {
            DatasetId::Mnist => "mnist",
            DatasetId::FashionMnist => "fashion-mnist",
        }
    }

    /// Class index from a digit or, for Fashion-MNIST, a case-insensitive
    /// class name such as `trouser` or `ankle-boot`.
    pub fn parse_class(self, s: &str) -> Result<u8> {
        let t = s.trim().to_ascii_lowercase();
        if let Ok(d) = t.parse::<u8>() {
            if d < 10 {
                return Ok(d);
            }
        }
        if self == DatasetId::FashionMnist {
            let t = match t.as_str() {
                "t-shirt" | "t-shirt/top" | "top" => "tshirt",
                "ankle-boot" | "ankle boot" => "boot",
                other => other,
            };
            if let Some(i) = FASHION_CLASSES.iter().position(|&c| c == t) {
                return Ok(i as u8);
            }
        }
        Err(Error::config(format!(
            "unknown class `{s}` for {}",
            self.name()
        )))
    }

    pub fn class_name(self, class: u8) -> String {
        match self {
            DatasetId::Mnist => class.to_string(),
            DatasetId::FashionMnist => FASHION_CLASSES
                .get(class as usize)
                .map_or_else(|| class.to_string(), |s| s.to_string()),
        }
    }

    /// Loads the training files under `<root>/<name>/`, gzip or plain.
    pub fn load_train(self, root: impl AsRef<Path>) -> Result<RawDataset> {
        let dir = root.as_ref().join(self.name());
        let pick = |stem: &str| {
            let plain = dir.join(stem);
            let gz = dir.join(format!("{stem}.gz"));
            if !plain.exists() && gz.exists() {
                gz
            } else {
                plain
            }
        };
        load_idx(
            pick("train-images-idx3-ubyte"),
            pick("train-labels-idx1-ubyte"),
        )
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(DatasetId::Mnist),
            "fashion-mnist" => Ok(DatasetId::FashionMnist),
            _ => Err(Error::config(format!("unknown dataset `{s}`"))),
        }
    }
}

/// Two-class subset with labels remapped to `{0, 1}`, in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryDataset {
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl BinaryDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Keeps classes `a` (label 0) and `b` (label 1).
pub fn filter_binary(raw: &RawDataset, a: u8, b: u8) -> Result<BinaryDataset> {
    if a == b {
        return Err(Error::config(format!(
            "class pair must be distinct, got {a}/{b}"
        )));
    }
    let mut out = BinaryDataset {
        images: Vec::new(),
        labels: Vec::new(),
    };
    for (i, &l) in raw.labels.iter().enumerate() {
        if l == a || l == b {
            out.images
                .push(raw.image(i).iter().map(|&p| f64::from(p)).collect());
            out.labels.push(u8::from(l == b));
        }
    }
    if out.is_empty() {
        return Err(Error::config(format!("no samples of classes {a} or {b}")));
    }
    if !out.labels.contains(&0) || !out.labels.contains(&1) {
        return Err(Error::config(format!(
            "class pair {a}/{b} is missing one class"
        )));
    }
    Ok(out)
}

/// Angle-encoded samples with binary labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClientDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl ClientDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_one_fraction(&self) -> f64 {
        self.labels.iter().map(|&l| f64::from(l)).sum::<f64>() / self.len() as f64
    }
}

/// Disjoint index sets: one per client, then the test set.
pub fn partition_clients(
    pool: usize,
    n_clients: usize,
    per_client: usize,
    test_size: usize,
    seed: u64,
) -> Result<(Vec<Vec<usize>>, Vec<usize>)> {
    let need = n_clients * per_client + test_size;
    if need > pool {
        return Err(Error::config(format!(
            "{n_clients} clients x {per_client} + {test_size} test points need {need} samples, pool has {pool}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PARTITION_STREAM);
    let picked = rand::seq::index::sample(&mut rng, pool, need).into_vec();
    let clients = picked[..n_clients * per_client]
        .chunks(per_client.max(1))
        .take(n_clients)
        .map(<[usize]>::to_vec)
        .collect();
    Ok((clients, picked[n_clients * per_client..].to_vec()))
}

/// Client and test sets for one seed, encoded with a PCA fitted on the
/// union of the clients' samples.
#[derive(Clone, Debug)]
pub struct Split {
    pub clients: Vec<ClientDataset>,
    pub test: ClientDataset,
    pub pca: PcaModel,
    /// Test features that fell outside the fitted range and were clipped.
    pub clipped: usize,
}

pub fn build_split(
    data: &BinaryDataset,
    n_clients: usize,
    per_client: usize,
    test_size: usize,
    n_features: usize,
    seed: u64,
) -> Result<Split> {
    let (client_idx, test_idx) =
        partition_clients(data.len(), n_clients, per_client, test_size, seed)?;
    let train: Vec<Vec<f64>> = client_idx
        .iter()
        .flatten()
        .map(|&i| data.images[i].clone())
        .collect();
    let pca = pca_fit(&train, n_features)?;
    let encode = |idx: &[usize]| {
        let mut clipped = 0;
        let mut set = ClientDataset::default();
        for &i in idx {
            let (f, c) = pca.transform(&data.images[i]);
            clipped += c;
            set.features.push(f);
            set.labels.push(data.labels[i]);
        }
        (set, clipped)
    };
    let clients = client_idx.iter().map(|idx| encode(idx).0).collect();
    let (test, clipped) = encode(&test_idx);
    Ok(Split {
        clients,
        test,
        pca,
        clipped,
    })
}

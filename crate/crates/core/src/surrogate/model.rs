use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{FeatureLayout, FeatureMap, Normalizer};
use super::labels::LabelVector;
use super::net::{probability, Network};
use super::thresholds::Thresholds;
use super::SurrogateError;

/// First bytes of a model file.
pub const MODEL_MAGIC: &[u8; 8] = b"EVJRSNN\0";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// One labelled training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: FeatureMap,
    pub labels: LabelVector,
}

/// Anything that maps a padded feature map to per-binary probabilities of
/// length `e_max * d_ev`.
pub trait BinaryPredictor: Sync {
    fn layout(&self) -> FeatureLayout;
    fn d_ev(&self) -> usize;
    fn predict(&self, features: &FeatureMap) -> Result<Vec<f64>, SurrogateError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    pub layout: FeatureLayout,
    pub d_ev: usize,
    pub normalizer: Normalizer,
    pub network: Network,
    pub thresholds: Option<Thresholds>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    layout: FeatureLayout,
    d_ev: usize,
    normalizer: Normalizer,
    network: Network,
    thresholds: Option<Thresholds>,
    param_count: usize,
}

impl SurrogateModel {
    pub fn e_max(&self) -> usize {
        self.layout.e_max
    }

    /// Binary file: magic, `u32` format version, `u64` header length, a JSON
    /// header (layout, normaliser, layer list, thresholds), then every
    /// parameter as little-endian `f64`. Integers are little-endian.
    pub fn write_to(&self, mut w: impl Write) -> Result<(), SurrogateError> {
        let header = Header {
            layout: self.layout,
            d_ev: self.d_ev,
            normalizer: self.normalizer.clone(),
            network: self.network.clone(),
            thresholds: self.thresholds,
            param_count: self.network.params.len(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| SurrogateError::Format(e.to_string()))?;
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&MODEL_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        let mut buf = Vec::with_capacity(self.network.params.len() * 8);
        for p in &self.network.params {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, SurrogateError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(SurrogateError::Format("not a model file".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != MODEL_FORMAT_VERSION {
            return Err(SurrogateError::Format(format!("format version {version}")));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json).map_err(|e| SurrogateError::Format(e.to_string()))?;
        let mut raw = vec![0u8; header.param_count * 8];
        r.read_exact(&mut raw)?;
        let mut network = header.network;
        network.params = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        network.validate()?;
        let model = SurrogateModel {
            layout: header.layout,
            d_ev: header.d_ev,
            normalizer: header.normalizer,
            network,
            thresholds: header.thresholds,
        };
        model.check()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), SurrogateError> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SurrogateError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    fn check(&self) -> Result<(), SurrogateError> {
        let input = (self.layout.channels(), self.layout.timesteps);
        if self.network.input != input || self.network.output_len() != self.layout.e_max * self.d_ev {
            return Err(SurrogateError::Shape(format!(
                "network {:?} -> {} does not fit layout {:?} with d_ev {}",
                self.network.input,
                self.network.output_len(),
                self.layout,
                self.d_ev
            )));
        }
        Ok(())
    }

    /// Probabilities for the real EVs only (`ev_count * d_ev` values).
    pub fn predict_stripped(&self, features: &FeatureMap) -> Result<Vec<f64>, SurrogateError> {
        let mut p = self.predict(features)?;
        p.truncate(features.ev_count * self.d_ev);
        Ok(p)
    }
}

impl BinaryPredictor for SurrogateModel {
    fn layout(&self) -> FeatureLayout {
        self.layout
    }

    fn d_ev(&self) -> usize {
        self.d_ev
    }

    fn predict(&self, features: &FeatureMap) -> Result<Vec<f64>, SurrogateError> {
        if features.layout != self.layout {
            return Err(SurrogateError::Shape(format!("features {:?}, model {:?}", features.layout, self.layout)));
        }
        let x = self.normalizer.apply(features)?;
        Ok(self.network.logits(x.data.view())?.into_iter().map(probability).collect())
    }
}

/// Checks that every sample shares the first sample's layout and stride.
pub(crate) fn check_samples(samples: &[Sample]) -> Result<(FeatureLayout, usize), SurrogateError> {
    let first = samples.first().ok_or(SurrogateError::Empty)?;
    let layout = first.features.layout;
    let d_ev = first.labels.d_ev;
    for s in samples {
        let l = &s.labels;
        if s.features.layout != layout
            || l.d_ev != d_ev
            || l.e_max != layout.e_max
            || l.bits.len() != l.e_max * l.d_ev
            || l.ev_count != s.features.ev_count
        {
            return Err(SurrogateError::Shape(format!(
                "sample with layout {:?}, d_ev {}, {} EVs does not match {layout:?}, d_ev {d_ev}",
                s.features.layout, l.d_ev, l.ev_count
            )));
        }
    }
    Ok((layout, d_ev))
}


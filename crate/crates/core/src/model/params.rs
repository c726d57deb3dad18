use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use crate::error::{Error, Result};

macro_rules! param_ids {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        /// Every trainable array, in checkpoint order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum ParamId { $($variant),+ }

        impl ParamId {
            pub const ALL: &'static [ParamId] = &[$(ParamId::$variant),+];

            pub fn name(self) -> &'static str {
                match self { $(ParamId::$variant => $name),+ }
            }

            pub fn from_name(name: &str) -> Option<Self> {
                match name { $($name => Some(ParamId::$variant),)+ _ => None }
            }
        }
    };
}

param_ids! {
    WordEmb => "m_word",
    PosEmb => "m_pos",
    PhEmb => "m_ph",
    EncWq => "enc.attn.w_q",
    EncWk => "enc.attn.w_k",
    EncWv => "enc.attn.w_v",
    EncWo => "enc.attn.w_o",
    EncLn1Gain => "enc.ln1.gain",
    EncLn1Bias => "enc.ln1.bias",
    EncFf1W => "enc.ff1.w",
    EncFf1B => "enc.ff1.b",
    EncFf2W => "enc.ff2.w",
    EncFf2B => "enc.ff2.b",
    EncLn2Gain => "enc.ln2.gain",
    EncLn2Bias => "enc.ln2.bias",
    DecH => "h_decoder",
    DecSelfWq => "dec.self.w_q",
    DecSelfWk => "dec.self.w_k",
    DecSelfWv => "dec.self.w_v",
    DecSelfWo => "dec.self.w_o",
    DecLn1Gain => "dec.ln1.gain",
    DecLn1Bias => "dec.ln1.bias",
    DecCrossWq => "dec.cross.w_q",
    DecCrossWk => "dec.cross.w_k",
    DecCrossWv => "dec.cross.w_v",
    DecCrossWo => "dec.cross.w_o",
    DecLn2Gain => "dec.ln2.gain",
    DecLn2Bias => "dec.ln2.bias",
    DecFf1W => "dec.ff1.w",
    DecFf1B => "dec.ff1.b",
    DecFf2W => "dec.ff2.w",
    DecFf2B => "dec.ff2.b",
    DecLn3Gain => "dec.ln3.gain",
    DecLn3Bias => "dec.ln3.bias",
    BiasN => "b_n",
    BiasPh => "b_ph",
}

impl ParamId {
    pub fn shape(self, cfg: &ModelConfig) -> (usize, usize) {
        use ParamId::*;
        let d = cfg.d_model;
        let ff = cfg.ff_dim();
        match self {
            WordEmb => (cfg.vocab_size, d),
            PosEmb => (cfg.max_len, d),
            PhEmb => (cfg.phoneme_code_vocab_size, d),
            EncWq | EncWk | EncWv | EncWo | DecSelfWq | DecSelfWk | DecSelfWv | DecSelfWo
            | DecCrossWq | DecCrossWk | DecCrossWv | DecCrossWo => (d, d),
            EncLn1Gain | EncLn1Bias | EncLn2Gain | EncLn2Bias | DecLn1Gain | DecLn1Bias
            | DecLn2Gain | DecLn2Bias | DecLn3Gain | DecLn3Bias | EncFf2B | DecFf2B => (1, d),
            EncFf1W | DecFf1W => (d, ff),
            EncFf1B | DecFf1B => (1, ff),
            EncFf2W | DecFf2W => (ff, d),
            DecH => (2 * d, d),
            BiasN | BiasPh => (1, cfg.vocab_size),
        }
    }

    fn is_gain(self) -> bool {
        use ParamId::*;
        matches!(self, EncLn1Gain | EncLn2Gain | DecLn1Gain | DecLn2Gain | DecLn3Gain)
    }

    fn is_bias(self) -> bool {
        use ParamId::*;
        matches!(
            self,
            EncLn1Bias
                | EncLn2Bias
                | DecLn1Bias
                | DecLn2Bias
                | DecLn3Bias
                | EncFf1B
                | EncFf2B
                | DecFf1B
                | DecFf2B
                | BiasN
                | BiasPh
        )
    }

    fn is_embedding(self) -> bool {
        matches!(self, ParamId::WordEmb | ParamId::PosEmb | ParamId::PhEmb)
    }
}

/// All trainable arrays, indexed by [`ParamId`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    arrays: Vec<Array2<f64>>,
}

impl ParamStore {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        ParamStore {
            arrays: ParamId::ALL.iter().map(|id| Array2::zeros(id.shape(cfg))).collect(),
        }
    }

    pub fn zeros_like(other: &ParamStore) -> Self {
        ParamStore {
            arrays: other.arrays.iter().map(|a| Array2::zeros(a.dim())).collect(),
        }
    }

    /// Seeded initialization: embeddings `N(0, 0.1²)`, projection weights
    /// `N(0, 1/fan_in)`, layer-norm gains 1, biases 0.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = Self::zeros(cfg);
        for &id in ParamId::ALL {
            let a = store.get_mut(id);
            if id.is_gain() {
                a.fill(1.0);
            } else if id.is_bias() {
                continue;
            } else {
                let std = if id.is_embedding() {
                    0.1
                } else {
                    1.0 / (a.nrows() as f64).sqrt()
                };
                let normal = Normal::new(0.0, std).expect("positive std");
                a.mapv_inplace(|_| normal.sample(&mut rng));
            }
        }
        store
    }

    /// Assembles a store from named arrays; every id must appear once with
    /// the shape `cfg` implies.
    pub fn from_arrays(cfg: &ModelConfig, named: Vec<(String, Array2<f64>)>) -> Result<Self> {
        let mut slots: Vec<Option<Array2<f64>>> = vec![None; ParamId::ALL.len()];
        for (name, array) in named {
            let id = ParamId::from_name(&name)
                .ok_or_else(|| Error::CorruptCheckpoint(format!("unknown array {name:?}")))?;
            if array.dim() != id.shape(cfg) {
                return Err(Error::CorruptCheckpoint(format!(
                    "array {name} has shape {:?}, expected {:?}",
                    array.dim(),
                    id.shape(cfg)
                )));
            }
            if slots[id as usize].replace(array).is_some() {
                return Err(Error::CorruptCheckpoint(format!("array {name} repeated")));
            }
        }
        let arrays = slots
            .into_iter()
            .zip(ParamId::ALL)
            .map(|(a, id)| a.ok_or_else(|| Error::CorruptCheckpoint(format!("missing array {}", id.name()))))
            .collect::<Result<Vec<_>>>()?;
        Ok(ParamStore { arrays })
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.arrays[id as usize]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.arrays[id as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Array2<f64>)> {
        ParamId::ALL.iter().copied().zip(self.arrays.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (ParamId, &mut Array2<f64>)> {
        ParamId::ALL.iter().copied().zip(self.arrays.iter_mut())
    }

    pub fn len(&self) -> usize {
        self.arrays.iter().map(|a| a.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_finite(&self) -> bool {
        self.arrays.iter().all(|a| a.iter().all(|v| v.is_finite()))
    }

    /// First array containing a non-finite value.
    pub fn first_non_finite(&self) -> Option<ParamId> {
        self.iter().find(|(_, a)| a.iter().any(|v| !v.is_finite())).map(|(id, _)| id)
    }

    pub fn add_assign(&mut self, other: &ParamStore) {
        for (a, b) in self.arrays.iter_mut().zip(&other.arrays) {
            *a += b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in &mut self.arrays {
            a.mapv_inplace(|v| v * c);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.arrays
            .iter()
            .flat_map(|a| a.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for &id in ParamId::ALL {
            assert_eq!(ParamId::from_name(id.name()), Some(id));
        }
        assert_eq!(ParamId::ALL.len(), 36);
    }

    #[test]
    fn init_is_seeded_and_shaped() {
        let cfg = ModelConfig::desk(40, 30);
        let a = ParamStore::init(&cfg, 5);
        assert_eq!(a, ParamStore::init(&cfg, 5));
        assert_ne!(a, ParamStore::init(&cfg, 6));
        for (id, arr) in a.iter() {
            assert_eq!(arr.dim(), id.shape(&cfg), "{}", id.name());
        }
        assert!(a.get(ParamId::EncLn1Gain).iter().all(|&g| g == 1.0));
        assert!(a.get(ParamId::BiasN).iter().all(|&b| b == 0.0));
        assert!(a.all_finite());
    }

    #[test]
    fn from_arrays_validates() {
        let cfg = ModelConfig::desk(10, 8);
        let store = ParamStore::init(&cfg, 1);
        let named: Vec<(String, Array2<f64>)> =
            store.iter().map(|(id, a)| (id.name().to_string(), a.clone())).collect();
        assert_eq!(ParamStore::from_arrays(&cfg, named.clone()).unwrap(), store);
        let mut missing = named.clone();
        missing.pop();
        assert!(ParamStore::from_arrays(&cfg, missing).is_err());
        let mut bad = named;
        bad[0].1 = Array2::zeros((1, 1));
        assert!(ParamStore::from_arrays(&cfg, bad).is_err());
    }
}

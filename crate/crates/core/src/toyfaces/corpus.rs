//! On-disk corpus: `<root>/id_<%05d>/img_<%03d>.png` plus per-identity
//! `meta.json` (the exact parameters used) and a root `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageTensor;

use super::params::{
    identity_seed, item_seed, sample_identity, sample_style_with, IdentityParams, StyleParams,
    StyleRanges,
};
use super::render::render_face;

pub const CORPUS_FORMAT: &str = "tcdiff-corpus-v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_identities: usize,
    pub styles_per_identity: usize,
    pub image_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub style_ranges: Option<StyleRanges>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format: String,
    pub seed: u64,
    pub n_identities: usize,
    pub styles_per_identity: usize,
    pub image_size: usize,
    pub style_ranges: StyleRanges,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityMeta {
    pub identity_index: usize,
    pub identity_seed: u64,
    pub identity: IdentityParams,
    pub samples: Vec<SampleMeta>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleMeta {
    pub sample_index: usize,
    pub seed: u64,
    pub style: StyleParams,
}

pub fn id_dir_name(identity_index: usize) -> String {
    format!("id_{identity_index:05}")
}

pub fn img_file_name(sample_index: usize) -> String {
    format!("img_{sample_index:03}.png")
}

/// Generate the corpus. Items are independent given their `(identity, sample)`
/// coordinates, so the loop order is irrelevant to the output bytes.
pub fn generate_corpus(root: &Path, spec: &CorpusSpec) -> Result<PathBuf> {
    if spec.n_identities == 0 || spec.styles_per_identity == 0 {
        return Err(Error::invalid_argument("corpus counts must be positive"));
    }
    let ranges = spec.style_ranges.unwrap_or_default();
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;

    for i in 0..spec.n_identities {
        let id_params = sample_identity(identity_seed(spec.seed, i as u64));
        let dir = root.join(id_dir_name(i));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

        let mut samples = Vec::with_capacity(spec.styles_per_identity);
        for j in 0..spec.styles_per_identity {
            let seed = item_seed(spec.seed, i as u64, j as u64);
            let style = sample_style_with(seed, &ranges);
            let img = render_face(&id_params, &style, spec.image_size)?;
            img.save_png(&dir.join(img_file_name(j)))?;
            samples.push(SampleMeta { sample_index: j, seed, style });
        }

        let meta = IdentityMeta {
            identity_index: i,
            identity_seed: identity_seed(spec.seed, i as u64),
            identity: id_params,
            samples,
        };
        write_json(&dir.join("meta.json"), &meta)?;
    }

    let manifest = CorpusManifest {
        format: CORPUS_FORMAT.to_string(),
        seed: spec.seed,
        n_identities: spec.n_identities,
        styles_per_identity: spec.styles_per_identity,
        image_size: spec.image_size,
        style_ranges: ranges,
    };
    let manifest_path = root.join("manifest.json");
    write_json(&manifest_path, &manifest)?;
    Ok(manifest_path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Decode { path: path.to_path_buf(), msg: e.to_string() })?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Decode { path: path.to_path_buf(), msg: e.to_string() })
}

/// Read-only view over a corpus directory.
#[derive(Debug, Clone)]
pub struct Corpus {
    root: PathBuf,
    pub manifest: CorpusManifest,
    pub identities: Vec<IdentityMeta>,
}

impl Corpus {
    pub fn open(root: &Path) -> Result<Self> {
        let manifest: CorpusManifest = read_json(&root.join("manifest.json"))?;
        if manifest.format != CORPUS_FORMAT {
            return Err(Error::invalid_state(format!(
                "unexpected corpus format {:?} at {}",
                manifest.format,
                root.display()
            )));
        }
        let mut identities = Vec::with_capacity(manifest.n_identities);
        for i in 0..manifest.n_identities {
            let meta: IdentityMeta = read_json(&root.join(id_dir_name(i)).join("meta.json"))?;
            identities.push(meta);
        }
        Ok(Corpus { root: root.to_path_buf(), manifest, identities })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn n_identities(&self) -> usize {
        self.manifest.n_identities
    }

    pub fn n_images(&self) -> usize {
        self.identities.iter().map(|m| m.samples.len()).sum()
    }

    pub fn image_path(&self, identity_index: usize, sample_index: usize) -> PathBuf {
        self.root.join(id_dir_name(identity_index)).join(img_file_name(sample_index))
    }

    pub fn load_image(&self, identity_index: usize, sample_index: usize) -> Result<ImageTensor> {
        ImageTensor::load_png(&self.image_path(identity_index, sample_index))
    }

    /// Neutral-style render of an identity, computed from the stored factors.
    pub fn neutral_render(&self, identity_index: usize) -> Result<ImageTensor> {
        let meta = self.identities.get(identity_index).ok_or_else(|| {
            Error::invalid_argument(format!("identity index {identity_index} out of range"))
        })?;
        render_face(&meta.identity, &StyleParams::neutral(), self.manifest.image_size)
    }

    /// All `(identity_index, sample_index)` coordinates, row-major.
    pub fn item_coords(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_images());
        for meta in &self.identities {
            for s in &meta.samples {
                out.push((meta.identity_index, s.sample_index));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp_dir(tag: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("tcdiff_corpus_{tag}_{}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        fs::create_dir_all(&d).unwrap();
        d
    }

    #[test]
    fn corpus_counts_and_retrieval() {
        let root = tmp_dir("counts");
        let spec = CorpusSpec {
            n_identities: 3,
            styles_per_identity: 4,
            image_size: 16,
            seed: 11,
            style_ranges: None,
        };
        generate_corpus(&root, &spec).unwrap();
        let corpus = Corpus::open(&root).unwrap();
        assert_eq!(corpus.n_images(), 12);
        for (i, j) in corpus.item_coords() {
            let img = corpus.load_image(i, j).unwrap();
            assert_eq!(img.shape(), (3, 16, 16));
        }
        fs::remove_dir_all(&root).unwrap();
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let spec = CorpusSpec {
            n_identities: 2,
            styles_per_identity: 2,
            image_size: 16,
            seed: 5,
            style_ranges: None,
        };
        let a = tmp_dir("bita");
        let b = tmp_dir("bitb");
        generate_corpus(&a, &spec).unwrap();
        generate_corpus(&b, &spec).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let pa = a.join(id_dir_name(i)).join(img_file_name(j));
                let pb = b.join(id_dir_name(i)).join(img_file_name(j));
                assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap());
            }
        }
        fs::remove_dir_all(&a).unwrap();
        fs::remove_dir_all(&b).unwrap();
    }

    #[test]
    fn zero_counts_rejected() {
        let root = tmp_dir("zero");
        let spec = CorpusSpec {
            n_identities: 0,
            styles_per_identity: 4,
            image_size: 16,
            seed: 1,
            style_ranges: None,
        };
        assert!(generate_corpus(&root, &spec).is_err());
        fs::remove_dir_all(&root).unwrap();
    }
}

//! Linear morphable model: mean shape/texture plus orthonormal PCA bases,
//! shape coefficients, and the Euclidean shape loss between coefficient
//! vectors.

#[cfg(feature = "nn")]
pub mod mapper;

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::blob::Blob;
use crate::error::{Error, Result};
use crate::toyfaces::Mesh3D;

/// PCA coordinates of a mesh in the fitted shape space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeCoefficients(pub Vec<f64>);

impl ShapeCoefficients {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct MorphableModel {
    /// 3n-vector mean shape.
    mean_shape: Vec<f64>,
    /// 3n × n_s, orthonormal columns, descending explained variance.
    shape_basis: DMatrix<f64>,
    shape_variance: Vec<f64>,
    /// 3n-vector mean texture; empty when no textures were fitted.
    mean_texture: Vec<f64>,
    texture_basis: DMatrix<f64>,
    texture_variance: Vec<f64>,
    faces: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MorphableSidecar {
    pub format: String,
    pub n_vertices: usize,
    pub n_shape_components: usize,
    pub n_texture_components: usize,
    pub shape_explained_variance: Vec<f64>,
    pub texture_explained_variance: Vec<f64>,
}

/// PCA of a set of row vectors: returns (mean, orthonormal basis columns,
/// per-component population variance), components sorted by variance
/// descending, zero-variance directions dropped.
fn pca_rows(rows: &[Vec<f64>], n_components: usize, what: &str) -> Result<(Vec<f64>, DMatrix<f64>, Vec<f64>)> {
    let n = rows.len();
    let dim = rows[0].len();
    let mut mean = vec![0.0; dim];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut centered = DMatrix::<f64>::zeros(n, dim);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            centered[(i, j)] = v - mean[j];
        }
    }
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("svd requested v_t");
    let singular = svd.singular_values;

    // Population variance along each principal direction.
    let mut comps: Vec<(f64, usize)> = singular
        .iter()
        .enumerate()
        .map(|(i, s)| (s * s / n as f64, i))
        .collect();
    comps.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    let total: f64 = comps.iter().map(|(v, _)| v).sum();
    let floor = total.max(1e-30) * 1e-12;
    let mut kept = Vec::new();
    for &(var, idx) in comps.iter().take(n_components) {
        if var > floor {
            kept.push((var, idx));
        }
    }
    if kept.len() < n_components {
        log::warn!(
            "{what}: dropped {} zero-variance component(s), keeping {}",
            n_components - kept.len(),
            kept.len()
        );
    }

    let mut basis = DMatrix::<f64>::zeros(dim, kept.len());
    let mut variance = Vec::with_capacity(kept.len());
    for (col, &(var, idx)) in kept.iter().enumerate() {
        variance.push(var);
        // Canonical sign: the entry of largest magnitude is positive.
        let row = v_t.row(idx);
        let mut sign = 1.0;
        let mut best = 0.0;
        for v in row.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = if *v < 0.0 { -1.0 } else { 1.0 };
            }
        }
        for (j, v) in row.iter().enumerate() {
            basis[(j, col)] = sign * v;
        }
    }
    Ok((mean, basis, variance))
}

/// Fit the shape model by PCA over meshes of shared topology.
pub fn fit_pca(meshes: &[Mesh3D], n_components: usize) -> Result<MorphableModel> {
    fit_pca_with_textures(meshes, None, n_components, 0)
}

/// Fit shape PCA, and texture PCA when per-vertex colors are given.
pub fn fit_pca_with_textures(
    meshes: &[Mesh3D],
    textures: Option<&[Vec<[f64; 3]>]>,
    n_shape_components: usize,
    n_texture_components: usize,
) -> Result<MorphableModel> {
    if meshes.len() < 2 {
        return Err(Error::invalid_argument("PCA needs at least 2 meshes"));
    }
    let first = &meshes[0];
    let dim = first.n_vertices() * 3;
    for m in meshes {
        if m.n_vertices() != first.n_vertices() || m.faces != first.faces {
            return Err(Error::invalid_argument("meshes do not share a topology"));
        }
        if !m.is_finite() {
            return Err(Error::invalid_argument("mesh contains non-finite vertices"));
        }
    }
    let max_components = dim.min(meshes.len() - 1);
    if n_shape_components > max_components {
        return Err(Error::invalid_argument(format!(
            "n_components {n_shape_components} exceeds min(3n, count-1) = {max_components}"
        )));
    }

    let rows: Vec<Vec<f64>> = meshes.iter().map(|m| m.flatten()).collect();
    let (mean_shape, shape_basis, shape_variance) = pca_rows(&rows, n_shape_components, "shape PCA")?;

    let (mean_texture, texture_basis, texture_variance) = match textures {
        Some(tex) => {
            if tex.len() != meshes.len() {
                return Err(Error::invalid_argument("texture count does not match mesh count"));
            }
            if n_texture_components > max_components {
                return Err(Error::invalid_argument(format!(
                    "n_texture_components {n_texture_components} exceeds {max_components}"
                )));
            }
            let trows: Vec<Vec<f64>> = tex
                .iter()
                .map(|colors| {
                    colors.iter().flat_map(|c| c.iter().copied()).collect::<Vec<f64>>()
                })
                .collect();
            if trows[0].len() != dim {
                return Err(Error::invalid_argument("textures do not match mesh vertex count"));
            }
            pca_rows(&trows, n_texture_components, "texture PCA")?
        }
        None => (Vec::new(), DMatrix::<f64>::zeros(0, 0), Vec::new()),
    };

    Ok(MorphableModel {
        mean_shape,
        shape_basis,
        shape_variance,
        mean_texture,
        texture_basis,
        texture_variance,
        faces: first.faces.clone(),
    })
}

impl MorphableModel {
    pub fn n_vertices(&self) -> usize {
        self.mean_shape.len() / 3
    }

    pub fn n_shape_components(&self) -> usize {
        self.shape_basis.ncols()
    }

    pub fn n_texture_components(&self) -> usize {
        self.texture_basis.ncols()
    }

    pub fn has_texture(&self) -> bool {
        !self.mean_texture.is_empty()
    }

    pub fn shape_variance(&self) -> &[f64] {
        &self.shape_variance
    }

    pub fn texture_variance(&self) -> &[f64] {
        &self.texture_variance
    }

    pub fn mean_shape(&self) -> &[f64] {
        &self.mean_shape
    }

    pub fn shape_basis(&self) -> &DMatrix<f64> {
        &self.shape_basis
    }

    /// `S = mean + basis · alpha`, reshaped onto the stored topology.
    pub fn reconstruct_shape(&self, alpha: &ShapeCoefficients) -> Result<Mesh3D> {
        if alpha.len() != self.n_shape_components() {
            return Err(Error::invalid_argument(format!(
                "coefficient dimension {} does not match model n_s {}",
                alpha.len(),
                self.n_shape_components()
            )));
        }
        let mut flat = self.mean_shape.clone();
        for (col, &a) in alpha.0.iter().enumerate() {
            for (j, f) in flat.iter_mut().enumerate() {
                *f += a * self.shape_basis[(j, col)];
            }
        }
        Mesh3D::from_flat(&flat, self.faces.clone())
    }

    /// Orthogonal projection of a mesh onto the shape space:
    /// `alpha = Bᵀ (S - mean)`.
    pub fn project_shape(&self, mesh: &Mesh3D) -> Result<ShapeCoefficients> {
        let flat = mesh.flatten();
        if flat.len() != self.mean_shape.len() {
            return Err(Error::invalid_argument("mesh does not match model topology"));
        }
        let centered: Vec<f64> =
            flat.iter().zip(&self.mean_shape).map(|(v, m)| v - m).collect();
        let mut alpha = vec![0.0; self.n_shape_components()];
        for (col, a) in alpha.iter_mut().enumerate() {
            *a = centered
                .iter()
                .enumerate()
                .map(|(j, v)| v * self.shape_basis[(j, col)])
                .sum();
        }
        Ok(ShapeCoefficients(alpha))
    }

    /// `T = mean + basis · beta`, as per-vertex RGB. No clamping: consumers
    /// clamp for display.
    pub fn reconstruct_texture(&self, beta: &[f64]) -> Result<Vec<[f64; 3]>> {
        if !self.has_texture() {
            return Err(Error::invalid_state("model was fitted without textures"));
        }
        if beta.len() != self.n_texture_components() {
            return Err(Error::invalid_argument(format!(
                "coefficient dimension {} does not match model n_t {}",
                beta.len(),
                self.n_texture_components()
            )));
        }
        let mut flat = self.mean_texture.clone();
        for (col, &b) in beta.iter().enumerate() {
            for (j, f) in flat.iter_mut().enumerate() {
                *f += b * self.texture_basis[(j, col)];
            }
        }
        Ok(flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    pub fn project_texture(&self, colors: &[[f64; 3]]) -> Result<Vec<f64>> {
        if !self.has_texture() {
            return Err(Error::invalid_state("model was fitted without textures"));
        }
        let flat: Vec<f64> = colors.iter().flat_map(|c| c.iter().copied()).collect();
        if flat.len() != self.mean_texture.len() {
            return Err(Error::invalid_argument("texture does not match model vertex count"));
        }
        let centered: Vec<f64> =
            flat.iter().zip(&self.mean_texture).map(|(v, m)| v - m).collect();
        Ok((0..self.n_texture_components())
            .map(|col| {
                centered
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * self.texture_basis[(j, col)])
                    .sum()
            })
            .collect())
    }

    pub fn save(&self, path_prefix: &Path) -> Result<(PathBuf, PathBuf)> {
        let blob_path = path_prefix.with_extension("bin");
        let sidecar_path = path_prefix.with_extension("json");
        let mut blob = Blob::new();
        blob.insert_f64("mean_shape", vec![self.mean_shape.len()], self.mean_shape.clone());
        blob.insert_f64(
            "shape_basis",
            vec![self.shape_basis.nrows(), self.shape_basis.ncols()],
            matrix_to_row_major(&self.shape_basis),
        );
        blob.insert_f64("shape_variance", vec![self.shape_variance.len()], self.shape_variance.clone());
        if self.has_texture() {
            blob.insert_f64("mean_texture", vec![self.mean_texture.len()], self.mean_texture.clone());
            blob.insert_f64(
                "texture_basis",
                vec![self.texture_basis.nrows(), self.texture_basis.ncols()],
                matrix_to_row_major(&self.texture_basis),
            );
            blob.insert_f64(
                "texture_variance",
                vec![self.texture_variance.len()],
                self.texture_variance.clone(),
            );
        }
        let faces_flat: Vec<f64> =
            self.faces.iter().flat_map(|f| f.iter().map(|&i| i as f64)).collect();
        blob.insert_f64("faces", vec![self.faces.len(), 3], faces_flat);
        blob.save(&blob_path)?;

        let sidecar = MorphableSidecar {
            format: "tcdiff-morphable-v1".to_string(),
            n_vertices: self.n_vertices(),
            n_shape_components: self.n_shape_components(),
            n_texture_components: self.n_texture_components(),
            shape_explained_variance: self.shape_variance.clone(),
            texture_explained_variance: self.texture_variance.clone(),
        };
        crate::toyfaces::write_json(&sidecar_path, &sidecar)?;
        Ok((blob_path, sidecar_path))
    }

    pub fn load(path_prefix: &Path) -> Result<Self> {
        let blob = Blob::load(&path_prefix.with_extension("bin"))?;
        let mean_shape = blob.get("mean_shape")?.as_f64()?.to_vec();
        let basis_arr = blob.get("shape_basis")?;
        let shape_basis = matrix_from_row_major(basis_arr.shape(), basis_arr.as_f64()?);
        let shape_variance = blob.get("shape_variance")?.as_f64()?.to_vec();
        let (mean_texture, texture_basis, texture_variance) =
            if blob.names().any(|n| n == "mean_texture") {
                let t = blob.get("texture_basis")?;
                (
                    blob.get("mean_texture")?.as_f64()?.to_vec(),
                    matrix_from_row_major(t.shape(), t.as_f64()?),
                    blob.get("texture_variance")?.as_f64()?.to_vec(),
                )
            } else {
                (Vec::new(), DMatrix::<f64>::zeros(0, 0), Vec::new())
            };
        let faces_arr = blob.get("faces")?;
        let faces: Vec<[usize; 3]> = faces_arr
            .as_f64()?
            .chunks_exact(3)
            .map(|c| [c[0] as usize, c[1] as usize, c[2] as usize])
            .collect();
        Ok(MorphableModel {
            mean_shape,
            shape_basis,
            shape_variance,
            mean_texture,
            texture_basis,
            texture_variance,
            faces,
        })
    }
}

fn matrix_to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn matrix_from_row_major(shape: &[usize], data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(shape[0], shape[1], |i, j| data[i * shape[1] + j])
}

/// Eq-8-style 3D shape loss: the Euclidean distance between coefficient
/// vectors. The subgradient at exact equality is taken as zero.
pub fn shape_loss(alpha_id: &ShapeCoefficients, alpha_hat: &ShapeCoefficients) -> Result<f64> {
    if alpha_id.len() != alpha_hat.len() {
        return Err(Error::invalid_argument(format!(
            "coefficient dimensions differ: {} vs {}",
            alpha_id.len(),
            alpha_hat.len()
        )));
    }
    Ok(alpha_id
        .0
        .iter()
        .zip(&alpha_hat.0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Analytic gradient of [`shape_loss`] with respect to `alpha_hat`.
pub fn shape_loss_grad(alpha_id: &ShapeCoefficients, alpha_hat: &ShapeCoefficients) -> Result<Vec<f64>> {
    let d = shape_loss(alpha_id, alpha_hat)?;
    if d == 0.0 {
        return Ok(vec![0.0; alpha_hat.len()]);
    }
    Ok(alpha_hat.0.iter().zip(&alpha_id.0).map(|(h, i)| (h - i) / d).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::toyfaces::{identity_mesh, identity_vertex_colors, sample_identity, IdentityParams};

    fn toy_meshes(n: usize, noise: f64, seed: u64) -> Vec<Mesh3D> {
        let mut r = rng::stream(seed, &[]);
        (0..n)
            .map(|i| {
                let mut m = identity_mesh(&sample_identity(i as u64));
                if noise > 0.0 {
                    for v in &mut m.vertices {
                        for c in v.iter_mut() {
                            *c += rng::standard_normal(&mut r) * noise;
                        }
                    }
                }
                m
            })
            .collect()
    }

    #[test]
    fn basis_is_orthonormal() {
        let model = fit_pca(&toy_meshes(60, 1e-3, 1), 8).unwrap();
        let b = model.shape_basis();
        let gram = b.transpose() * b;
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expect).abs() < 1e-8, "gram[{i},{j}] = {}", gram[(i, j)]);
            }
        }
    }

    #[test]
    fn top8_explains_affine_family() {
        let model = fit_pca(&toy_meshes(120, 1e-3, 2), 16).unwrap();
        let var = model.shape_variance();
        let total: f64 = var.iter().sum();
        let top8: f64 = var.iter().take(8).sum();
        // remaining spread comes from the injected 1e-3 noise only
        assert!(top8 / total > 0.999, "top8 ratio {}", top8 / total);
    }

    #[test]
    fn reconstruct_zero_gives_mean() {
        let model = fit_pca(&toy_meshes(40, 0.0, 3), 8).unwrap();
        let mesh = model.reconstruct_shape(&ShapeCoefficients(vec![0.0; 8])).unwrap();
        for (v, m) in mesh.flatten().iter().zip(model.mean_shape()) {
            assert!((v - m).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruction_is_linear_in_coefficients() {
        let model = fit_pca(&toy_meshes(40, 0.0, 4), 8).unwrap();
        let mut r = rng::stream(9, &[]);
        let a = ShapeCoefficients((0..8).map(|_| rng::standard_normal(&mut r)).collect());
        let b = ShapeCoefficients((0..8).map(|_| rng::standard_normal(&mut r)).collect());
        let sum = ShapeCoefficients(a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect());
        let ra = model.reconstruct_shape(&a).unwrap().flatten();
        let rb = model.reconstruct_shape(&b).unwrap().flatten();
        let rsum = model.reconstruct_shape(&sum).unwrap().flatten();
        for (((x, y), s), m) in ra.iter().zip(&rb).zip(&rsum).zip(model.mean_shape()) {
            assert!((x + y - m - s).abs() < 1e-9);
        }
    }

    #[test]
    fn full_rank_round_trip_is_exact() {
        // noise-free family has rank 8; project+reconstruct at n_s=8 is exact
        let meshes = toy_meshes(40, 0.0, 5);
        let model = fit_pca(&meshes, 8).unwrap();
        for mesh in meshes.iter().take(10) {
            let alpha = model.project_shape(mesh).unwrap();
            let rec = model.reconstruct_shape(&alpha).unwrap();
            assert!(mesh.max_vertex_distance(&rec) < 1e-8);
        }
    }

    #[test]
    fn degenerate_corpus_drops_all_components() {
        let m = identity_mesh(&sample_identity(0));
        let model = fit_pca(&[m.clone(), m], 1).unwrap();
        assert_eq!(model.n_shape_components(), 0);
    }

    #[test]
    fn topology_mismatch_rejected() {
        let a = identity_mesh(&sample_identity(0));
        let mut b = identity_mesh(&sample_identity(1));
        b.faces[0] = [0, 2, 1];
        assert!(fit_pca(&[a, b], 2).is_err());
    }

    #[test]
    fn excessive_components_rejected() {
        let meshes = toy_meshes(3, 0.0, 6);
        assert!(fit_pca(&meshes, 3).is_err());
        assert!(fit_pca(&meshes, 2).is_ok());
    }

    #[test]
    fn texture_round_trip() {
        let ids: Vec<IdentityParams> = (0..30).map(sample_identity).collect();
        let meshes: Vec<Mesh3D> = ids.iter().map(identity_mesh).collect();
        let textures: Vec<Vec<[f64; 3]>> = ids.iter().map(identity_vertex_colors).collect();
        // Texture family is affine in skin_base only: rank 1.
        let model = fit_pca_with_textures(&meshes, Some(&textures), 8, 1).unwrap();
        assert!(model.has_texture());
        let beta = model.project_texture(&textures[0]).unwrap();
        let rec = model.reconstruct_texture(&beta).unwrap();
        for (a, b) in textures[0].iter().zip(&rec) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() < 1e-8);
            }
        }
        // beta = 0 gives the mean texture
        let mean = model.reconstruct_texture(&vec![0.0; 1]).unwrap();
        let flat_mean: Vec<f64> = mean.iter().flat_map(|c| c.iter().copied()).collect();
        for (a, b) in flat_mean.iter().zip(&model.mean_texture) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn texture_free_model_rejects_texture_ops() {
        let model = fit_pca(&toy_meshes(10, 0.0, 7), 4).unwrap();
        assert!(model.reconstruct_texture(&[0.0; 4]).is_err());
    }

    #[test]
    fn shape_loss_hand_values() {
        let zero = ShapeCoefficients(vec![0.0; 5]);
        assert_eq!(shape_loss(&zero, &zero).unwrap(), 0.0);
        let v = ShapeCoefficients(vec![3.0, 4.0, 0.0, 0.0, 0.0]);
        assert_eq!(shape_loss(&zero, &v).unwrap(), 5.0);
        let w = ShapeCoefficients(vec![0.0; 4]);
        assert!(shape_loss(&zero, &w).is_err());
    }

    #[test]
    fn shape_loss_gradient_matches_finite_differences() {
        let mut r = rng::stream(11, &[]);
        for _ in 0..10 {
            let a = ShapeCoefficients((0..6).map(|_| rng::standard_normal(&mut r)).collect());
            let b = ShapeCoefficients((0..6).map(|_| rng::standard_normal(&mut r)).collect());
            let grad = shape_loss_grad(&a, &b).unwrap();
            let eps = 1e-6;
            for k in 0..6 {
                let mut bp = b.clone();
                bp.0[k] += eps;
                let mut bm = b.clone();
                bm.0[k] -= eps;
                let fd = (shape_loss(&a, &bp).unwrap() - shape_loss(&a, &bm).unwrap()) / (2.0 * eps);
                let rel = (grad[k] - fd).abs() / fd.abs().max(1e-9);
                assert!(rel < 1e-5, "component {k}: analytic {} vs fd {fd}", grad[k]);
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = std::env::temp_dir().join(format!("tcdiff_mm_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let model = fit_pca(&toy_meshes(30, 1e-3, 8), 8).unwrap();
        let prefix = dir.join("model");
        model.save(&prefix).unwrap();
        let back = MorphableModel::load(&prefix).unwrap();
        assert_eq!(model.mean_shape, back.mean_shape);
        assert_eq!(model.shape_basis, back.shape_basis);
        assert_eq!(model.faces, back.faces);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}

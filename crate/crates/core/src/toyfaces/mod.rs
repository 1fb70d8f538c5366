//! Procedural face corpus with ground-truth identity and style factors.

mod corpus;
mod mesh;
mod params;
mod render;

pub use corpus::{
    generate_corpus, id_dir_name, img_file_name, read_json, write_json, Corpus, CorpusManifest,
    CorpusSpec, IdentityMeta, SampleMeta, CORPUS_FORMAT,
};
pub use mesh::{identity_mesh, identity_vertex_colors, Mesh3D, MESH_VERTEX_COUNT};
pub use params::{
    identity_seed, item_seed, sample_identity, sample_style, sample_style_with, IdentityParams,
    OcclusionBox, StyleParams, StyleRanges,
};
pub use render::{render_face, MIN_IMAGE_SIZE};

use crate::embedding::{dot, EmbeddingMatrix, PrototypeSet};
use crate::eval::{ClusterAssignment, ClusterTag};

/// Nearest-prototype classification by cosine similarity. Never opens a
/// novel cluster; ties go to the lower class id.
pub fn protonet_assign(protos: &PrototypeSet, queries: &EmbeddingMatrix) -> ClusterAssignment {
    let cluster_of = queries
        .iter_rows()
        .map(|q| {
            let mut best = (f64::NEG_INFINITY, 0);
            for (i, p) in protos.vectors().iter_rows().enumerate() {
                let s = dot(q, p);
                if s > best.0 {
                    best = (s, i);
                }
            }
            best.1
        })
        .collect();
    let tags = protos.class_ids().iter().map(|&c| ClusterTag::Known(c)).collect();
    ClusterAssignment::new(cluster_of, tags).expect("prototype classes are distinct")
}

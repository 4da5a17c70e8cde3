use super::{ElementKey, SimplicialMesh};
use crate::error::{Error, Result};
use std::collections::HashSet;
use std::sync::Arc;

/// Coarsest common refinement of two forest meshes with containment maps.
#[derive(Clone, Debug)]
pub struct Overlay {
    pub mesh: Arc<SimplicialMesh>,
    /// For each overlay element, the element of the first mesh containing it.
    pub parent_a: Vec<usize>,
    /// For each overlay element, the element of the second mesh containing it.
    pub parent_b: Vec<usize>,
}

/// For each element of `fine`, the element of `coarse` that contains it.
pub fn ancestor_map(coarse: &SimplicialMesh, fine: &SimplicialMesh) -> Result<Vec<usize>> {
    if coarse.forest_id() != fine.forest_id() {
        return Err(Error::ForestMismatch(coarse.forest_id(), fine.forest_id()));
    }
    let index = coarse.key_index();
    fine.keys()
        .iter()
        .map(|k| {
            let mut cur = Some(*k);
            while let Some(c) = cur {
                if let Some(&i) = index.get(&c) {
                    return Ok(i);
                }
                cur = c.parent();
            }
            Err(Error::NotARefinement)
        })
        .collect()
}

/// The coarsest mesh of the shared forest refining both `a` and `b`.
pub fn common_refinement(a: &SimplicialMesh, b: &SimplicialMesh) -> Result<Overlay> {
    if a.forest_id() != b.forest_id() {
        return Err(Error::ForestMismatch(a.forest_id(), b.forest_id()));
    }
    let mesh = if a.same_elements(b) {
        a.clone()
    } else {
        let union: HashSet<ElementKey> = a.keys().iter().chain(b.keys()).copied().collect();
        let mut covered: HashSet<ElementKey> = HashSet::new();
        for k in &union {
            let mut cur = k.parent();
            while let Some(c) = cur {
                if !covered.insert(c) {
                    break;
                }
                cur = c.parent();
            }
        }
        let keys: Vec<ElementKey> = union.into_iter().filter(|k| !covered.contains(k)).collect();
        SimplicialMesh::from_keys(a.forest().clone(), keys)?
    };
    let parent_a = ancestor_map(a, &mesh)?;
    let parent_b = ancestor_map(b, &mesh)?;
    Ok(Overlay {
        mesh: Arc::new(mesh),
        parent_a,
        parent_b,
    })
}

/// Inverse of an ancestor map: children listed per coarse element.
pub(crate) fn children_lists(parent: &[usize], n_coarse: usize) -> Vec<Vec<usize>> {
    let mut lists = vec![Vec::new(); n_coarse];
    for (fine, &c) in parent.iter().enumerate() {
        lists[c].push(fine);
    }
    lists
}

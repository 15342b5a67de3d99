use crate::error::{Error, Result};
use crate::topology::NodeId;

/// One-hot source block followed by one-hot destination block.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HopEncoding {
    src: NodeId,
    dst: NodeId,
    n_nodes: usize,
}

impl HopEncoding {
    pub fn src(&self) -> NodeId {
        self.src
    }

    pub fn dst(&self) -> NodeId {
        self.dst
    }

    pub fn len(&self) -> usize {
        2 * self.n_nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_vec(&self) -> Vec<u8> {
        let mut v = vec![0; self.len()];
        v[self.src.index()] = 1;
        v[self.n_nodes + self.dst.index()] = 1;
        v
    }
}

pub fn encode_hop(src: NodeId, dst: NodeId, n_nodes: usize) -> Result<HopEncoding> {
    if src.index() >= n_nodes || dst.index() >= n_nodes {
        return Err(Error::Index(format!("hop {src}->{dst} outside {n_nodes} nodes")));
    }
    if src == dst {
        return Err(Error::Index(format!("hop {src}->{dst} is a self-loop")));
    }
    Ok(HopEncoding { src, dst, n_nodes })
}

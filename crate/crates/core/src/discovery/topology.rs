use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ids::PeerGuid;
use crate::proxy::Envelope;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("cycle detected in forwarding tree")]
    CycleDetected,
    #[error("node {0:?} has more than one parent")]
    MultipleParents(PeerGuid),
    #[error("node {0:?} is not reachable from the root")]
    Unreachable(PeerGuid),
    #[error("edge refers to unknown node {0:?}")]
    UnknownNode(PeerGuid),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Robot,
    Gateway,
    Server,
}

/// Forwarding tree rooted at the robot's proxy. Gateways are interior nodes
/// that relay one upstream frame to each of their children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyTree {
    root: PeerGuid,
    roles: BTreeMap<PeerGuid, NodeRole>,
    children: BTreeMap<PeerGuid, BTreeSet<PeerGuid>>,
}

impl TopologyTree {
    pub fn new(root: PeerGuid) -> Self {
        Self {
            root,
            roles: BTreeMap::from([(root, NodeRole::Robot)]),
            children: BTreeMap::new(),
        }
    }

    /// Robot connected straight to every server.
    pub fn direct(root: PeerGuid, servers: &[PeerGuid]) -> Self {
        let mut tree = Self::new(root);
        for s in servers {
            tree.add_node(*s, NodeRole::Server);
            tree.add_edge(root, *s).expect("nodes just added");
        }
        tree
    }

    /// Robot, one gateway, servers behind the gateway.
    pub fn gateway(root: PeerGuid, gateway: PeerGuid, servers: &[PeerGuid]) -> Self {
        let mut tree = Self::new(root);
        tree.add_node(gateway, NodeRole::Gateway);
        tree.add_edge(root, gateway).expect("nodes just added");
        for s in servers {
            tree.add_node(*s, NodeRole::Server);
            tree.add_edge(gateway, *s).expect("nodes just added");
        }
        tree
    }

    pub fn root(&self) -> PeerGuid {
        self.root
    }

    pub fn add_node(&mut self, guid: PeerGuid, role: NodeRole) {
        self.roles.insert(guid, role);
    }

    pub fn add_edge(&mut self, parent: PeerGuid, child: PeerGuid) -> Result<(), TopologyError> {
        for n in [parent, child] {
            if !self.roles.contains_key(&n) {
                return Err(TopologyError::UnknownNode(n));
            }
        }
        self.children.entry(parent).or_default().insert(child);
        Ok(())
    }

    pub fn role(&self, guid: &PeerGuid) -> Option<NodeRole> {
        self.roles.get(guid).copied()
    }

    /// Children in ascending guid order.
    pub fn children(&self, guid: &PeerGuid) -> impl Iterator<Item = &PeerGuid> {
        self.children.get(guid).into_iter().flatten()
    }

    pub fn node_count(&self) -> usize {
        self.roles.len()
    }

    fn check_acyclic(&self) -> Result<(), TopologyError> {
        // Kahn's algorithm over every edge, reachable or not.
        let mut indegree: BTreeMap<PeerGuid, usize> = self.roles.keys().map(|k| (*k, 0)).collect();
        for kids in self.children.values() {
            for k in kids {
                *indegree.get_mut(k).expect("edges reference known nodes") += 1;
            }
        }
        let mut ready: VecDeque<PeerGuid> = indegree.iter().filter(|(_, d)| **d == 0).map(|(k, _)| *k).collect();
        let mut seen = 0;
        while let Some(n) = ready.pop_front() {
            seen += 1;
            for k in self.children(&n) {
                let d = indegree.get_mut(k).expect("known node");
                *d -= 1;
                if *d == 0 {
                    ready.push_back(*k);
                }
            }
        }
        if seen == self.roles.len() {
            Ok(())
        } else {
            Err(TopologyError::CycleDetected)
        }
    }

    /// Breadth-first order from the root, siblings by ascending guid.
    pub fn flatten(&self) -> Result<Vec<PeerGuid>, TopologyError> {
        self.check_acyclic()?;
        let mut order = Vec::with_capacity(self.roles.len());
        let mut visited = HashSet::new();
        let mut queue = VecDeque::from([self.root]);
        visited.insert(self.root);
        while let Some(node) = queue.pop_front() {
            order.push(node);
            for child in self.children(&node) {
                if !visited.insert(*child) {
                    return Err(TopologyError::MultipleParents(*child));
                }
                queue.push_back(*child);
            }
        }
        if let Some(lost) = self.roles.keys().find(|k| !visited.contains(k)) {
            return Err(TopologyError::Unreachable(*lost));
        }
        Ok(order)
    }

    /// Relays a frame received at `at` to each child. Every copy carries the
    /// gateway-forwarded flag and shares the original payload buffer.
    pub fn forward(&self, envelope: &Envelope, at: &PeerGuid) -> Vec<(PeerGuid, Envelope)> {
        let relayed = Envelope {
            flags: envelope.flags.with_forwarded(),
            ..envelope.clone()
        };
        self.children(at).map(|c| (*c, relayed.clone())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::ServiceId;
    use crate::proxy::MsgType;
    use bytes::Bytes;

    fn g(b: u8) -> PeerGuid {
        PeerGuid::from_bytes([b; 32])
    }

    #[test]
    fn root_with_two_leaves() {
        let tree = TopologyTree::direct(g(0), &[g(2), g(1)]);
        assert_eq!(tree.flatten().unwrap(), vec![g(0), g(1), g(2)]);
    }

    #[test]
    fn gateway_fans_out_to_servers() {
        let tree = TopologyTree::gateway(g(0), g(9), &[g(1), g(2)]);
        assert_eq!(tree.flatten().unwrap(), vec![g(0), g(9), g(1), g(2)]);
    }

    #[test]
    fn bfs_is_level_order() {
        let mut tree = TopologyTree::new(g(0));
        for (n, role) in [
            (1, NodeRole::Gateway),
            (2, NodeRole::Server),
            (3, NodeRole::Server),
            (4, NodeRole::Server),
        ] {
            tree.add_node(g(n), role);
        }
        tree.add_edge(g(0), g(1)).unwrap();
        tree.add_edge(g(1), g(3)).unwrap();
        tree.add_edge(g(0), g(4)).unwrap();
        tree.add_edge(g(1), g(2)).unwrap();
        assert_eq!(tree.flatten().unwrap(), vec![g(0), g(1), g(4), g(2), g(3)]);
    }

    #[test]
    fn cycle_is_detected() {
        let mut tree = TopologyTree::gateway(g(0), g(9), &[g(1)]);
        tree.add_edge(g(1), g(0)).unwrap();
        assert_eq!(tree.flatten(), Err(TopologyError::CycleDetected));

        let mut island = TopologyTree::direct(g(0), &[g(1)]);
        island.add_node(g(5), NodeRole::Gateway);
        island.add_node(g(6), NodeRole::Gateway);
        island.add_edge(g(5), g(6)).unwrap();
        island.add_edge(g(6), g(5)).unwrap();
        assert_eq!(island.flatten(), Err(TopologyError::CycleDetected));
    }

    #[test]
    fn malformed_trees_are_rejected() {
        let mut diamond = TopologyTree::new(g(0));
        for n in 1..=3 {
            diamond.add_node(g(n), NodeRole::Gateway);
        }
        diamond.add_edge(g(0), g(1)).unwrap();
        diamond.add_edge(g(0), g(2)).unwrap();
        diamond.add_edge(g(1), g(3)).unwrap();
        diamond.add_edge(g(2), g(3)).unwrap();
        assert_eq!(diamond.flatten(), Err(TopologyError::MultipleParents(g(3))));

        let mut orphan = TopologyTree::new(g(0));
        orphan.add_node(g(7), NodeRole::Server);
        assert_eq!(orphan.flatten(), Err(TopologyError::Unreachable(g(7))));
        assert_eq!(orphan.add_edge(g(0), g(8)), Err(TopologyError::UnknownNode(g(8))));
    }

    #[test]
    fn flatten_visits_each_node_once() {
        let servers: Vec<_> = (10..30).map(g).collect();
        let tree = TopologyTree::gateway(g(0), g(1), &servers);
        let order = tree.flatten().unwrap();
        assert_eq!(order.len(), tree.node_count());
        assert_eq!(order.iter().collect::<HashSet<_>>().len(), order.len());
    }

    #[test]
    fn gateway_forwarding_sets_flag_and_shares_payload() {
        let tree = TopologyTree::gateway(g(0), g(9), &[g(1), g(2), g(3)]);
        let req = Envelope::control(MsgType::Request, ServiceId::default(), Bytes::from(vec![1u8; 512]));
        let out = tree.forward(&req, &g(9));
        assert_eq!(out.iter().map(|(c, _)| *c).collect::<Vec<_>>(), vec![g(1), g(2), g(3)]);
        assert!(out
            .iter()
            .all(|(_, e)| e.flags.forwarded() && e.payload.as_ptr() == req.payload.as_ptr()));
        // The robot itself has a single upstream child: the gateway.
        assert_eq!(tree.forward(&req, &g(0)).len(), 1);
        assert!(tree.forward(&req, &g(1)).is_empty());
    }
}

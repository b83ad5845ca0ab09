mod common;

use std::collections::HashMap;

use common::*;
use rand::Rng;
use ridematch::network::{bundled, NodeId, RoadNetwork};

#[test]
fn dijkstra_matches_bellman_ford() {
    let mut rng = rng(10);
    for _ in 0..60 {
        let n = rng.random_range(1..=25);
        let extra = rng.random_range(0..=3 * n);
        let net = random_network(&mut rng, n, extra);
        let index: HashMap<NodeId, usize> = net.nodes().iter().enumerate().map(|(i, v)| (*v, i)).collect();
        for s in 0..n {
            let oracle = bellman_ford(n, net.links(), &index, s);
            for (t, want) in oracle.iter().enumerate() {
                let (a, b) = (NodeId(s as u32), NodeId(t as u32));
                assert_eq!(net.shortest_travel_time(a, b).unwrap(), *want, "{a} -> {b}");
                let path = net.shortest_path(a, b).unwrap();
                match *want {
                    Some(tt) => {
                        let path = path.expect("reachable node has a path");
                        assert_eq!(path.first(), Some(&a));
                        assert_eq!(path.last(), Some(&b));
                        assert_eq!(net.path_travel_time(&path), Some(tt));
                    }
                    None => assert!(path.is_none()),
                }
            }
        }
    }
}

#[test]
fn sparse_networks_have_unreachable_pairs() {
    // One-way pair: 1 cannot return to 0.
    let net = RoadNetwork::from_toml_str(
        r#"
        nodes = [{ id = 0 }, { id = 1 }]
        links = [{ from = 0, to = 1, length_m = 10.0, travel_time_s = 5 }]
        "#,
    )
    .unwrap();
    assert_eq!(net.travel_time(NodeId(0), NodeId(1)), Some(5));
    assert_eq!(net.travel_time(NodeId(1), NodeId(0)), None);
    assert!(net.shortest_travel_time(NodeId(0), NodeId(7)).is_err());
}

#[test]
fn bundled_grid_is_manhattan() {
    let net = bundled("grid").unwrap();
    assert_eq!(net.nodes().len(), 64);
    assert_eq!(net.links().len(), 224);
    for (a, b) in [(0u32, 63u32), (9, 54), (27, 36), (7, 56)] {
        let (ra, ca) = (a / 8, a % 8);
        let (rb, cb) = (b / 8, b % 8);
        let hops = ra.abs_diff(rb) + ca.abs_diff(cb);
        assert_eq!(net.travel_time(NodeId(a), NodeId(b)), Some(60 * hops as i64));
        let path = net.shortest_path(NodeId(a), NodeId(b)).unwrap().unwrap();
        assert_eq!(net.path_length_m(&path), Some(400.0 * hops as f64));
    }
}

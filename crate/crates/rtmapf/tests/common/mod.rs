//! Shared fixtures for the integration and acceptance suites: benchmark-style
//! map generators, scenario sampling, and the hand-encoded bottleneck layout
//! used by the budget-allocation regression tests.
//!
//! Each test binary compiles this module separately and uses a subset of it.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rtmapf::domain::{AgentTask, Cell, GridMap, Instance};
use rtmapf::search::UNREACHABLE;

/// A 6x6 grid split by a wall with a single doorway at (2,0).
///
/// Agent 0 starts left of the doorway and parks inside it; agents 1-3 start
/// on the left and need the doorway to reach goals on the right; agents 4-6
/// shuffle vertically in the rightmost column and never need the doorway.
/// With index priorities and one shared budget pool, agent 1's hopeless
/// search starves agents 4-6; an even split leaves them enough to plan.
pub fn bottleneck_instance(budget: u64, window: u32, horizon: u32) -> Instance {
    let mut blocked = vec![false; 36];
    for y in 1..6 {
        blocked[y * 6 + 2] = true;
    }
    let map = GridMap::new(6, 6, blocked).unwrap();
    let pairs: [((u32, u32), (u32, u32)); 7] = [
        ((0, 0), (2, 0)),
        ((0, 3), (3, 3)),
        ((0, 2), (3, 2)),
        ((0, 1), (3, 1)),
        ((5, 2), (5, 5)),
        ((5, 3), (5, 1)),
        ((5, 4), (5, 0)),
    ];
    let agents = pairs
        .iter()
        .enumerate()
        .map(|(id, &((sx, sy), (gx, gy)))| AgentTask {
            id,
            start: Cell::new(sx, sy),
            goal: Cell::new(gx, gy),
        })
        .collect();
    Instance::new(map, agents, budget, window, horizon, 100).unwrap()
}

/// Uniform random obstacle map. Regenerates until at least `min_free` cells
/// stay open.
pub fn random_obstacle_map(
    width: u32,
    height: u32,
    obstacle_rate: f64,
    min_free: usize,
    rng: &mut ChaCha8Rng,
) -> GridMap {
    loop {
        let blocked: Vec<bool> = (0..width * height)
            .map(|_| rng.random_bool(obstacle_rate))
            .collect();
        let map = GridMap::new(width, height, blocked).unwrap();
        if map.unblocked_cells().count() >= min_free {
            return map;
        }
    }
}

/// A rooms-with-doors map in the style of the `room-32-32-4` benchmark grid:
/// walls every fifth row/column, one random door per wall segment between
/// adjacent rooms. The room adjacency graph is a grid, so the map is
/// connected.
pub fn room_map(size: u32, rng: &mut ChaCha8Rng) -> GridMap {
    let n = size as usize;
    let mut blocked = vec![false; n * n];
    let walls: Vec<usize> = (0..n).filter(|i| i % 5 == 4).collect();
    for y in 0..n {
        for x in 0..n {
            if walls.contains(&x) || walls.contains(&y) {
                blocked[y * n + x] = true;
            }
        }
    }
    // Room spans between consecutive walls (plus the edge strips).
    let mut spans = Vec::new();
    let mut begin = 0usize;
    for &w in &walls {
        spans.push((begin, w)); // [begin, w)
        begin = w + 1;
    }
    if begin < n {
        spans.push((begin, n));
    }
    // One door per vertical wall segment...
    for &wx in &walls {
        for &(y0, y1) in &spans {
            let door = rng.random_range(y0..y1);
            blocked[door * n + wx] = false;
        }
    }
    // ...and per horizontal wall segment.
    for &wy in &walls {
        for &(x0, x1) in &spans {
            let door = rng.random_range(x0..x1);
            blocked[wy * n + x0 + (door - x0)] = false;
        }
    }
    GridMap::new(size, size, blocked).unwrap()
}

/// Flood-fill labels of connected free-cell components; returns the cells of
/// the largest component.
pub fn largest_component(map: &GridMap) -> Vec<Cell> {
    let mut label = vec![usize::MAX; map.cell_count()];
    let mut sizes = Vec::new();
    for cell in map.unblocked_cells() {
        if label[map.index(cell)] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut count = 0usize;
        let mut queue = std::collections::VecDeque::from([cell]);
        label[map.index(cell)] = id;
        while let Some(c) = queue.pop_front() {
            count += 1;
            for nb in map.neighbors4(c) {
                if label[map.index(nb)] == usize::MAX {
                    label[map.index(nb)] = id;
                    queue.push_back(nb);
                }
            }
        }
        sizes.push(count);
    }
    let biggest = (0..sizes.len()).max_by_key(|&i| sizes[i]).unwrap_or(0);
    map.unblocked_cells()
        .filter(|&c| label[map.index(c)] == biggest)
        .collect()
}

/// Sample `k` agents with distinct starts and distinct goals, all inside the
/// map's largest connected component so that every goal is reachable.
pub fn sample_tasks(map: &GridMap, k: usize, rng: &mut ChaCha8Rng) -> Vec<AgentTask> {
    let component = largest_component(map);
    assert!(component.len() >= k, "component too small for {k} agents");
    let mut starts = component.clone();
    starts.shuffle(rng);
    starts.truncate(k);
    let mut goals = component;
    goals.shuffle(rng);
    goals.truncate(k);
    starts
        .into_iter()
        .zip(goals)
        .enumerate()
        .map(|(id, (start, goal))| AgentTask { id, start, goal })
        .collect()
}

/// Independent breadth-first search distance, used as the optimality oracle
/// against the planner. Deliberately knows nothing about the search module.
pub fn bfs_distance(map: &GridMap, from: Cell, to: Cell) -> u32 {
    let mut dist = vec![UNREACHABLE; map.cell_count()];
    dist[map.index(from)] = 0;
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(cell) = queue.pop_front() {
        if cell == to {
            return dist[map.index(cell)];
        }
        for nb in map.neighbors4(cell) {
            if dist[map.index(nb)] == UNREACHABLE {
                dist[map.index(nb)] = dist[map.index(cell)] + 1;
                queue.push_back(nb);
            }
        }
    }
    UNREACHABLE
}

//! Class hierarchy distances.
//!
//! The hierarchy is read as child-to-parent edges. A node with several
//! parents keeps only the one with the longest path to a root, which turns
//! the graph into a forest. Distances are edge counts along the undirected
//! forest.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Taxonomy {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    neighbours: Vec<Vec<usize>>,
    depth: Vec<usize>,
}

impl Taxonomy {
    pub fn from_edges<I, S>(edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        fn intern(names: &mut Vec<String>, index: &mut HashMap<String, usize>, s: &str) -> usize {
            if let Some(&i) = index.get(s) {
                return i;
            }
            names.push(s.to_owned());
            index.insert(s.to_owned(), names.len() - 1);
            names.len() - 1
        }
        let mut parents: Vec<Vec<usize>> = Vec::new();
        for (child, parent) in edges {
            let c = intern(&mut names, &mut index, child.as_ref());
            let p = intern(&mut names, &mut index, parent.as_ref());
            if c == p {
                return Err(Error::Taxonomy(format!("{:?} is its own parent", child.as_ref())));
            }
            parents.resize(names.len(), Vec::new());
            if !parents[c].contains(&p) {
                parents[c].push(p);
            }
        }
        parents.resize(names.len(), Vec::new());

        let depth = longest_depths(&parents, &names)?;
        let parent: Vec<Option<usize>> = parents
            .iter()
            .map(|ps| {
                ps.iter()
                    .copied()
                    .max_by(|&a, &b| depth[a].cmp(&depth[b]).then_with(|| names[b].cmp(&names[a])))
            })
            .collect();
        let mut neighbours = vec![Vec::new(); names.len()];
        for (c, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                neighbours[c].push(p);
                neighbours[p].push(c);
            }
        }
        Ok(Taxonomy {
            names,
            index,
            parent,
            neighbours,
            depth,
        })
    }

    /// Reads `child<TAB>parent` lines; blank lines and `#` comments are skipped.
    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (c, p) = t
                .split_once('\t')
                .ok_or_else(|| Error::parse(format!("taxonomy line {}", lineno + 1), "expected child<TAB>parent"))?;
            edges.push((c.trim().to_owned(), p.trim().to_owned()));
        }
        Self::from_edges(edges)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(BufReader::new(f))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, node: &str) -> bool {
        self.index.contains_key(node)
    }

    fn id(&self, node: &str) -> Result<usize> {
        self.index
            .get(node)
            .copied()
            .ok_or_else(|| Error::Taxonomy(format!("{node:?} is not in the taxonomy")))
    }

    /// Parent kept after resolving multiple parents.
    pub fn parent(&self, node: &str) -> Option<&str> {
        let id = *self.index.get(node)?;
        self.parent[id].map(|p| self.names[p].as_str())
    }

    /// Longest path to a root in the original graph.
    pub fn depth(&self, node: &str) -> Option<usize> {
        self.index.get(node).map(|&i| self.depth[i])
    }

    /// Distances from `node` to every node by name; unreachable nodes are absent.
    pub fn distances_from(&self, node: &str) -> Result<HashMap<&str, usize>> {
        let d = self.bfs(self.id(node)?);
        Ok(d.iter()
            .enumerate()
            .filter_map(|(i, d)| d.map(|d| (self.names[i].as_str(), d)))
            .collect())
    }

    fn bfs(&self, start: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        dist[start] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &v in &self.neighbours[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

fn longest_depths(parents: &[Vec<usize>], names: &[String]) -> Result<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let n = parents.len();
    let mut mark = vec![Mark::New; n];
    let mut depth = vec![0usize; n];
    for start in 0..n {
        if mark[start] == Mark::Done {
            continue;
        }
        // iterative post-order over parent links
        let mut stack = vec![(start, 0usize)];
        mark[start] = Mark::Active;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&p) = parents[node].get(*next) {
                *next += 1;
                match mark[p] {
                    Mark::Active => {
                        return Err(Error::Taxonomy(format!("cycle through {:?}", names[p])));
                    }
                    Mark::New => {
                        mark[p] = Mark::Active;
                        stack.push((p, 0));
                    }
                    Mark::Done => {}
                }
            } else {
                depth[node] = parents[node].iter().map(|&p| depth[p] + 1).max().unwrap_or(0);
                mark[node] = Mark::Done;
                stack.pop();
            }
        }
    }
    Ok(depth)
}

pub fn shortest_path_distance(tax: &Taxonomy, a: &str, b: &str) -> Result<usize> {
    let (ia, ib) = (tax.id(a)?, tax.id(b)?);
    tax.bfs(ia)[ib].ok_or_else(|| Error::Taxonomy(format!("no path between {a:?} and {b:?}")))
}

/// BFS results per source, computed on first use.
struct DistanceCache<'a> {
    tax: &'a Taxonomy,
    rows: HashMap<usize, Vec<Option<usize>>>,
}

impl<'a> DistanceCache<'a> {
    fn new(tax: &'a Taxonomy) -> Self {
        DistanceCache {
            tax,
            rows: HashMap::new(),
        }
    }

    fn get(&mut self, a: &str, b: &str) -> Result<usize> {
        let (ia, ib) = (self.tax.id(a)?, self.tax.id(b)?);
        let tax = self.tax;
        let row = self.rows.entry(ia).or_insert_with(|| tax.bfs(ia));
        row[ib].ok_or_else(|| Error::Taxonomy(format!("no path between {a:?} and {b:?}")))
    }
}

/// Counts of top-1 predictions by hierarchy distance to the true class.
/// `class_ids` names the candidate classes the rankings index.
pub fn distance_histogram(
    rankings: &[Vec<usize>],
    labels: &[usize],
    class_ids: &[String],
    tax: &Taxonomy,
) -> Result<BTreeMap<usize, usize>> {
    if rankings.len() != labels.len() {
        return Err(Error::shape(format!("{} rankings for {} labels", rankings.len(), labels.len())));
    }
    let mut cache = DistanceCache::new(tax);
    let mut hist = BTreeMap::new();
    for (r, &l) in rankings.iter().zip(labels) {
        let Some(&pred) = r.first() else { continue };
        let name = |i: usize| {
            class_ids
                .get(i)
                .ok_or_else(|| Error::invalid(format!("class index {i} outside {} classes", class_ids.len())))
        };
        let d = cache.get(name(l)?, name(pred)?)?;
        *hist.entry(d).or_insert(0) += 1;
    }
    Ok(hist)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDifficulty {
    pub class_id: String,
    pub min_dist_to_seen: usize,
    /// Other unseen classes with the same parent.
    pub sibling_count: usize,
    /// Unseen classes strictly closer than the nearest seen class.
    pub unseen_closer_count: usize,
    pub accuracy: Option<f64>,
}

pub fn class_difficulty(
    tax: &Taxonomy,
    seen: &[String],
    unseen: &[String],
    per_class_acc: &BTreeMap<String, f64>,
) -> Result<Vec<ClassDifficulty>> {
    if let Some(c) = seen.iter().find(|c| unseen.contains(c)) {
        return Err(Error::invalid(format!("class {c:?} is both seen and unseen")));
    }
    if seen.is_empty() {
        return Err(Error::invalid("class difficulty needs at least one seen class"));
    }
    let seen_ids: Vec<usize> = seen.iter().map(|c| tax.id(c)).collect::<Result<_>>()?;
    let unseen_ids: Vec<usize> = unseen.iter().map(|c| tax.id(c)).collect::<Result<_>>()?;

    unseen_ids
        .iter()
        .zip(unseen)
        .map(|(&u, name)| {
            let dist = tax.bfs(u);
            let min_dist_to_seen = seen_ids
                .iter()
                .filter_map(|&s| dist[s])
                .min()
                .ok_or_else(|| Error::Taxonomy(format!("{name:?} cannot reach any seen class")))?;
            let others = unseen_ids.iter().filter(|&&v| v != u);
            let sibling_count = match tax.parent[u] {
                Some(p) => others.clone().filter(|&&v| tax.parent[v] == Some(p)).count(),
                None => 0,
            };
            let unseen_closer_count = others
                .filter(|&&v| dist[v].is_some_and(|d| d < min_dist_to_seen))
                .count();
            Ok(ClassDifficulty {
                class_id: name.clone(),
                min_dist_to_seen,
                sibling_count,
                unseen_closer_count,
                accuracy: per_class_acc.get(name).copied(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tax(edges: &[(&str, &str)]) -> Taxonomy {
        Taxonomy::from_edges(edges.iter().copied()).unwrap()
    }

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn basic_distances() {
        let t = tax(&[("a", "p"), ("b", "p"), ("p", "root"), ("c", "root")]);
        assert_eq!(shortest_path_distance(&t, "a", "b").unwrap(), 2);
        assert_eq!(shortest_path_distance(&t, "a", "a").unwrap(), 0);
        assert_eq!(shortest_path_distance(&t, "a", "c").unwrap(), 3);
        assert!(shortest_path_distance(&t, "a", "zzz").is_err());
    }

    #[test]
    fn unreachable_pair_is_an_error() {
        let t = tax(&[("a", "r1"), ("b", "r2")]);
        assert!(matches!(shortest_path_distance(&t, "a", "b"), Err(Error::Taxonomy(_))));
    }

    #[test]
    fn cycles_are_rejected() {
        assert!(Taxonomy::from_edges([("a", "b"), ("b", "c"), ("c", "a")]).is_err());
        assert!(Taxonomy::from_edges([("a", "a")]).is_err());
    }

    #[test]
    fn multiple_parents_keep_longest_path() {
        // x sits under both a shallow and a deep node
        let t = tax(&[("x", "shallow"), ("x", "deep"), ("shallow", "root"), ("deep", "mid"), ("mid", "root")]);
        assert_eq!(t.parent("x"), Some("deep"));
        assert_eq!(t.depth("x"), Some(3));
        assert_eq!(shortest_path_distance(&t, "x", "shallow").unwrap(), 4);
    }

    #[test]
    fn tsv_parsing() {
        let t = Taxonomy::read_tsv("# comment\na\tp\n\nb\tp\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 3);
        assert!(Taxonomy::read_tsv("a p\n".as_bytes()).is_err());
    }

    #[test]
    fn histogram_cases() {
        let t = tax(&[("a", "p"), ("b", "p"), ("c", "q"), ("p", "r"), ("q", "r")]);
        let ids = s(&["a", "b", "c"]);
        let perfect = vec![vec![0, 1, 2], vec![1, 0, 2], vec![2, 0, 1]];
        assert_eq!(distance_histogram(&perfect, &[0, 1, 2], &ids, &t).unwrap(), BTreeMap::from([(0, 3)]));
        let sibling = vec![vec![1, 0, 2], vec![0, 1, 2]];
        assert_eq!(distance_histogram(&sibling, &[0, 1], &ids, &t).unwrap(), BTreeMap::from([(2, 2)]));
        let far = vec![vec![2, 0, 1]];
        assert_eq!(distance_histogram(&far, &[0], &ids, &t).unwrap(), BTreeMap::from([(4, 1)]));
    }

    #[test]
    fn difficulty_strict_inequality_and_isolated_leaf() {
        // p has a seen child s1 and two unseen children u1, u2
        let t = tax(&[("s1", "p"), ("u1", "p"), ("u2", "p"), ("p", "r"), ("q", "r"), ("u3", "q")]);
        let acc = BTreeMap::from([("u1".to_string(), 0.5)]);
        let d = class_difficulty(&t, &s(&["s1"]), &s(&["u1", "u2", "u3"]), &acc).unwrap();
        assert_eq!((d[0].min_dist_to_seen, d[0].sibling_count, d[0].unseen_closer_count), (2, 1, 0));
        assert_eq!(d[0].accuracy, Some(0.5));
        assert_eq!(d[1].accuracy, None);
        // u3 is alone under q and four steps from s1; u1 and u2 are not closer
        assert_eq!((d[2].min_dist_to_seen, d[2].sibling_count, d[2].unseen_closer_count), (4, 0, 0));
    }

    /// Two families: a fungus genus whose only seen relative is far away,
    /// and a plant genus sitting next to a seen species.
    #[test]
    fn difficulty_fixture() {
        let t = tax(&[
            ("morel", "morchella"),
            ("black_morel", "morchella"),
            ("false_morel", "gyromitra"),
            ("morchella", "fungus"),
            ("gyromitra", "fungus"),
            ("puffball", "fungus"),
            ("fungus", "organism"),
            ("holly", "ilex"),
            ("yaupon", "ilex"),
            ("ilex", "plant"),
            ("oak", "plant"),
            ("plant", "organism"),
        ]);
        let seen = s(&["puffball", "yaupon", "oak"]);
        let unseen = s(&["morel", "black_morel", "false_morel", "holly"]);
        let d = class_difficulty(&t, &seen, &unseen, &BTreeMap::new()).unwrap();
        let triples: Vec<(usize, usize, usize)> =
            d.iter().map(|c| (c.min_dist_to_seen, c.sibling_count, c.unseen_closer_count)).collect();
        // morel: puffball via morchella-fungus = 3; sibling black_morel at 2;
        //        false_morel at 4 is not closer than 3
        // black_morel: same as morel
        // false_morel: puffball at 3; morel, black_morel at 4
        // holly: yaupon at 2; nothing closer
        assert_eq!(triples, [(3, 1, 1), (3, 1, 1), (3, 0, 0), (2, 0, 0)]);
    }

    fn floyd_warshall(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
        let inf = usize::MAX / 4;
        let mut d = vec![vec![inf; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0;
        }
        for &(a, b) in edges {
            d[a][b] = 1;
            d[b][a] = 1;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i][k] + d[k][j];
                    if via < d[i][j] {
                        d[i][j] = via;
                    }
                }
            }
        }
        d
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn bfs_matches_floyd_warshall(parents in proptest::collection::vec(any::<prop::sample::Index>(), 1..60)) {
            // node i+1 hangs under a random earlier node
            let edges: Vec<(usize, usize)> = parents.iter().enumerate().map(|(i, p)| (i + 1, p.index(i + 1))).collect();
            let n = edges.len() + 1;
            let names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
            let t = Taxonomy::from_edges(edges.iter().map(|&(c, p)| (names[c].clone(), names[p].clone()))).unwrap();
            let fw = floyd_warshall(n, &edges);
            for a in 0..n {
                let d = t.distances_from(&names[a]).unwrap();
                for b in 0..n {
                    prop_assert_eq!(d[names[b].as_str()], fw[a][b]);
                }
            }
        }

        #[test]
        fn histogram_total_is_sample_count(preds in proptest::collection::vec((0usize..4, 0usize..4), 0..40)) {
            let t = tax(&[("a", "p"), ("b", "p"), ("c", "q"), ("d", "q"), ("p", "r"), ("q", "r")]);
            let ids = s(&["a", "b", "c", "d"]);
            let rankings: Vec<Vec<usize>> = preds.iter().map(|&(p, _)| vec![p]).collect();
            let labels: Vec<usize> = preds.iter().map(|&(_, l)| l).collect();
            let h = distance_histogram(&rankings, &labels, &ids, &t).unwrap();
            prop_assert_eq!(h.values().sum::<usize>(), preds.len());
            // leaves only: no two classes at distance one
            prop_assert!(!h.contains_key(&1));
        }
    }
}

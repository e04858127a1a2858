// Loads the built-in 32-class relation graph and a small custom one, and shows
// how malformed graphs are reported.
//
// $ cargo run --example relation_graph

use anatomy_forge::relation::{load_graph, DEFAULT_GRAPH};
use anatomy_forge::EdgeKind;

const CUSTOM: &str = "\
class 1 lung
class 2 trachea
class 3 liver
weights 1.0 1.0 1.0 0.8
containment trachea lung 0.30
adjacency liver lung 20
";

fn main() {
    let g = load_graph(DEFAULT_GRAPH, 32).unwrap();
    for kind in [EdgeKind::Containment, EdgeKind::Adjacency, EdgeKind::Exclusion] {
        let n = g.edges().iter().filter(|e| e.kind == kind).count();
        println!("{:<12} {n:>4} edges", kind.keyword());
    }
    println!("classes excluded from the liver: {}", g.exclusions_of(5).len());

    let custom = load_graph(CUSTOM, 3).unwrap();
    print!("{}", custom.to_text());

    for bad in [
        "class 1 a\nclass 2 b\ncontainment a b 0.3\ncontainment b a 0.3\n",
        "class 1 a\nclass 2 b\nadjacency a c 20\n",
        "class 1 a\nclass 2 b\nexclusion a b high\n",
    ] {
        println!("error: {}", load_graph(bad, 2).unwrap_err());
    }
}

//! BSP-tree CSG over polygon soups.
//!
//! Solids are held as convex polygons partitioned by splitting planes; the
//! boolean operators clip each solid against the other's tree and stitch the
//! surviving polygons back together. Coplanar polygons are routed by normal
//! agreement so stacked faces resolve to a single copy.

use super::TriMesh;
use crate::geom::{add3, cross3, dot3, norm3, scale3, sub3, Vec3};

const PLANE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
struct Plane {
    normal: Vec3,
    w: f64,
}

impl Plane {
    fn from_points(a: Vec3, b: Vec3, c: Vec3) -> Option<Plane> {
        let n = cross3(sub3(b, a), sub3(c, a));
        let len = norm3(n);
        if len <= 1e-30 {
            return None;
        }
        let normal = scale3(n, 1.0 / len);
        Some(Plane {
            normal,
            w: dot3(normal, a),
        })
    }

    fn flip(&mut self) {
        self.normal = scale3(self.normal, -1.0);
        self.w = -self.w;
    }
}

#[derive(Debug, Clone)]
struct Polygon {
    vertices: Vec<Vec3>,
    plane: Plane,
}

impl Polygon {
    fn flip(&mut self) {
        self.vertices.reverse();
        self.plane.flip();
    }
}

const COPLANAR: u8 = 0;
const FRONT: u8 = 1;
const BACK: u8 = 2;
const SPANNING: u8 = 3;

fn split_polygon(
    plane: &Plane,
    polygon: Polygon,
    coplanar_front: &mut Vec<Polygon>,
    coplanar_back: &mut Vec<Polygon>,
    front: &mut Vec<Polygon>,
    back: &mut Vec<Polygon>,
) {
    let mut polygon_type = 0u8;
    let types: Vec<u8> = polygon
        .vertices
        .iter()
        .map(|&v| {
            let t = dot3(plane.normal, v) - plane.w;
            let ty = if t < -PLANE_EPS {
                BACK
            } else if t > PLANE_EPS {
                FRONT
            } else {
                COPLANAR
            };
            polygon_type |= ty;
            ty
        })
        .collect();

    match polygon_type {
        COPLANAR => {
            if dot3(plane.normal, polygon.plane.normal) > 0.0 {
                coplanar_front.push(polygon);
            } else {
                coplanar_back.push(polygon);
            }
        }
        FRONT => front.push(polygon),
        BACK => back.push(polygon),
        _ => {
            let n = polygon.vertices.len();
            let mut f: Vec<Vec3> = Vec::with_capacity(n + 1);
            let mut b: Vec<Vec3> = Vec::with_capacity(n + 1);
            for i in 0..n {
                let j = (i + 1) % n;
                let (ti, tj) = (types[i], types[j]);
                let (vi, vj) = (polygon.vertices[i], polygon.vertices[j]);
                if ti != BACK {
                    f.push(vi);
                }
                if ti != FRONT {
                    b.push(vi);
                }
                if (ti | tj) == SPANNING {
                    let t = (plane.w - dot3(plane.normal, vi))
                        / dot3(plane.normal, sub3(vj, vi));
                    let v = add3(vi, scale3(sub3(vj, vi), t));
                    f.push(v);
                    b.push(v);
                }
            }
            if f.len() >= 3 {
                front.push(Polygon {
                    vertices: f,
                    plane: polygon.plane,
                });
            }
            if b.len() >= 3 {
                back.push(Polygon {
                    vertices: b,
                    plane: polygon.plane,
                });
            }
        }
    }
}

#[derive(Default)]
struct Node {
    plane: Option<Plane>,
    front: Option<Box<Node>>,
    back: Option<Box<Node>>,
    polygons: Vec<Polygon>,
}

impl Node {
    fn new(polygons: Vec<Polygon>) -> Node {
        let mut node = Node::default();
        node.build(polygons);
        node
    }

    fn invert(&mut self) {
        for p in &mut self.polygons {
            p.flip();
        }
        if let Some(plane) = &mut self.plane {
            plane.flip();
        }
        if let Some(front) = &mut self.front {
            front.invert();
        }
        if let Some(back) = &mut self.back {
            back.invert();
        }
        std::mem::swap(&mut self.front, &mut self.back);
    }

    /// Removes the parts of `polygons` inside this solid.
    fn clip_polygons(&self, polygons: Vec<Polygon>) -> Vec<Polygon> {
        let Some(plane) = &self.plane else {
            return polygons;
        };
        let mut front = Vec::new();
        let mut back = Vec::new();
        for p in polygons {
            // coplanar polygons travel with the side their normal faces
            let mut coplanar_front = Vec::new();
            let mut coplanar_back = Vec::new();
            split_polygon(
                plane,
                p,
                &mut coplanar_front,
                &mut coplanar_back,
                &mut front,
                &mut back,
            );
            front.append(&mut coplanar_front);
            back.append(&mut coplanar_back);
        }
        let mut front = match &self.front {
            Some(node) => node.clip_polygons(front),
            None => front,
        };
        let back = match &self.back {
            Some(node) => node.clip_polygons(back),
            None => Vec::new(),
        };
        front.extend(back);
        front
    }

    fn all_polygons(&self) -> Vec<Polygon> {
        let mut out = self.polygons.clone();
        if let Some(front) = &self.front {
            out.extend(front.all_polygons());
        }
        if let Some(back) = &self.back {
            out.extend(back.all_polygons());
        }
        out
    }

    fn clip_to(&mut self, bsp: &Node) {
        self.polygons = bsp.clip_polygons(std::mem::take(&mut self.polygons));
        if let Some(front) = &mut self.front {
            front.clip_to(bsp);
        }
        if let Some(back) = &mut self.back {
            back.clip_to(bsp);
        }
    }

    fn build(&mut self, polygons: Vec<Polygon>) {
        if polygons.is_empty() {
            return;
        }
        if self.plane.is_none() {
            self.plane = Some(polygons[0].plane);
        }
        let plane = self.plane.unwrap();
        let mut front = Vec::new();
        let mut back = Vec::new();
        for p in polygons {
            let mut coplanar_front = Vec::new();
            let mut coplanar_back = Vec::new();
            split_polygon(
                &plane,
                p,
                &mut coplanar_front,
                &mut coplanar_back,
                &mut front,
                &mut back,
            );
            self.polygons.append(&mut coplanar_front);
            self.polygons.append(&mut coplanar_back);
        }
        if !front.is_empty() {
            self.front
                .get_or_insert_with(Default::default)
                .build(front);
        }
        if !back.is_empty() {
            self.back.get_or_insert_with(Default::default).build(back);
        }
    }
}

fn to_polygons(mesh: &TriMesh) -> Vec<Polygon> {
    (0..mesh.faces.len())
        .filter_map(|f| {
            let [a, b, c] = mesh.face_points(f);
            Plane::from_points(a, b, c).map(|plane| Polygon {
                vertices: vec![a, b, c],
                plane,
            })
        })
        .collect()
}

fn to_mesh(polygons: Vec<Polygon>) -> TriMesh {
    let mut mesh = TriMesh::empty();
    for poly in polygons {
        let base = mesh.vertices.len() as u32;
        let n = poly.vertices.len() as u32;
        mesh.vertices.extend(poly.vertices);
        for i in 1..n - 1 {
            mesh.faces.push([base, base + i, base + i + 1]);
        }
    }
    mesh
}

pub fn union(a: &TriMesh, b: &TriMesh) -> TriMesh {
    let mut a = Node::new(to_polygons(a));
    let mut b = Node::new(to_polygons(b));
    a.clip_to(&b);
    b.clip_to(&a);
    b.invert();
    b.clip_to(&a);
    b.invert();
    a.build(b.all_polygons());
    to_mesh(a.all_polygons())
}

pub fn subtract(a: &TriMesh, b: &TriMesh) -> TriMesh {
    let mut a = Node::new(to_polygons(a));
    let mut b = Node::new(to_polygons(b));
    a.invert();
    a.clip_to(&b);
    b.clip_to(&a);
    b.invert();
    b.clip_to(&a);
    b.invert();
    a.build(b.all_polygons());
    a.invert();
    to_mesh(a.all_polygons())
}

pub fn intersect(a: &TriMesh, b: &TriMesh) -> TriMesh {
    let mut a = Node::new(to_polygons(a));
    let mut b = Node::new(to_polygons(b));
    a.invert();
    b.clip_to(&a);
    b.invert();
    a.clip_to(&b);
    b.clip_to(&a);
    a.build(b.all_polygons());
    a.invert();
    to_mesh(a.all_polygons())
}

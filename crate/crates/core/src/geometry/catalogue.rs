//! Named shape catalogue.
//!
//! The workbench ships six standard cross-sections, available from
//! [`Catalogue::builtin`] and as `assets/catalogue.toml`:
//!
//! | name    | outline                                             |
//! |---------|-----------------------------------------------------|
//! | `tr`    | equilateral triangle, side 30 mm                    |
//! | `cir`   | circle, radius 11 mm                                |
//! | `rtr`   | Reuleaux triangle, width 30 mm (96-vertex polygon)  |
//! | `trm`   | triangle with one corner cut at 30%, side 30 mm     |
//! | `b-rtr` | `rtr` scaled by 4/3                                 |
//! | `b-trm` | `trm` scaled by 4/3                                 |
//!
//! # File format
//!
//! A catalogue file is TOML with one `[shapes.<name>]` table per shape:
//!
//! ```toml
//! [shapes.tr]
//! kind = "polygon"
//! vertices = [[0.0, 17.32], [-15.0, -8.66], [15.0, -8.66]]  # mm
//! scale = 1.0          # optional, multiplies the coordinates
//!
//! [shapes.cir]
//! kind = "circle"
//! radius = 11.0        # mm
//!
//! [shapes.b-rtr]
//! kind = "derived"     # reuse another entry's outline
//! base = "rtr"
//! scale = 1.3333333333333333
//! ```
//!
//! `derived` entries may only reference non-derived entries.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::{CrossSection, GeometryError, Vec2};

#[derive(Debug, Error)]
pub enum CatalogueError {
    #[error("failed to read catalogue file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse catalogue TOML: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("shape '{name}' is invalid: {source}")]
    Shape {
        name: String,
        source: GeometryError,
    },
    #[error("derived shape '{name}' references unknown or derived base '{base}'")]
    BadBase { name: String, base: String },
}

/// An immutable map from shape name to cross-section.
#[derive(Clone, Debug)]
pub struct Catalogue {
    shapes: BTreeMap<String, CrossSection>,
}

#[derive(Deserialize)]
struct CatalogueFile {
    shapes: BTreeMap<String, ShapeEntry>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum ShapeEntry {
    Polygon {
        vertices: Vec<[f64; 2]>,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    Circle {
        radius: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    Derived {
        base: String,
        #[serde(default = "default_scale")]
        scale: f64,
    },
}

fn default_scale() -> f64 {
    1.0
}

impl Catalogue {
    /// The six standard shapes.
    pub fn builtin() -> Self {
        let four_thirds = 4.0 / 3.0;
        let rtr = Self::reuleaux_triangle(30.0, 32);
        let trm = Self::truncated_triangle(30.0, 0.3);
        let mut shapes = BTreeMap::new();
        shapes.insert("tr".to_string(), Self::equilateral_triangle(30.0));
        shapes.insert("cir".to_string(), CrossSection::circle(11.0).unwrap());
        shapes.insert("b-rtr".to_string(), rtr.scaled(four_thirds).unwrap());
        shapes.insert("b-trm".to_string(), trm.scaled(four_thirds).unwrap());
        shapes.insert("rtr".to_string(), rtr);
        shapes.insert("trm".to_string(), trm);
        Catalogue { shapes }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CatalogueError> {
        let file: CatalogueFile = toml::from_str(text)?;
        let mut shapes = BTreeMap::new();
        // Concrete entries first, then single-level derived ones.
        for (name, entry) in &file.shapes {
            let section = match entry {
                ShapeEntry::Polygon { vertices, scale } => {
                    let verts = vertices
                        .iter()
                        .map(|[x, y]| Vec2::new(x * scale, y * scale))
                        .collect();
                    Some(CrossSection::convex_polygon(verts))
                }
                ShapeEntry::Circle { radius, scale } => {
                    Some(CrossSection::circle(radius * scale))
                }
                ShapeEntry::Derived { .. } => None,
            };
            if let Some(section) = section {
                let section = section.map_err(|source| CatalogueError::Shape {
                    name: name.clone(),
                    source,
                })?;
                shapes.insert(name.clone(), section);
            }
        }
        for (name, entry) in &file.shapes {
            if let ShapeEntry::Derived { base, scale } = entry {
                let base_section =
                    shapes.get(base).cloned().ok_or_else(|| CatalogueError::BadBase {
                        name: name.clone(),
                        base: base.clone(),
                    })?;
                let section =
                    base_section
                        .scaled(*scale)
                        .map_err(|source| CatalogueError::Shape {
                            name: name.clone(),
                            source,
                        })?;
                shapes.insert(name.clone(), section);
            }
        }
        Ok(Catalogue { shapes })
    }

    pub fn from_path(path: &Path) -> Result<Self, CatalogueError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, name: &str) -> Option<&CrossSection> {
        self.shapes.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.shapes.keys().map(String::as_str)
    }

    /// Render the catalogue in the file format documented above.
    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        for (name, shape) in &self.shapes {
            out.push_str(&format!("[shapes.\"{name}\"]\n"));
            match shape {
                CrossSection::Circle { radius } => {
                    out.push_str("kind = \"circle\"\n");
                    out.push_str(&format!("radius = {radius:?}\n"));
                }
                CrossSection::ConvexPolygon { vertices } => {
                    out.push_str("kind = \"polygon\"\n");
                    out.push_str("vertices = [\n");
                    for v in vertices {
                        out.push_str(&format!("  [{:?}, {:?}],\n", v.x, v.y));
                    }
                    out.push_str("]\n");
                }
            }
            out.push('\n');
        }
        out
    }

    /// Equilateral triangle with the given side length, one vertex up.
    pub fn equilateral_triangle(side: f64) -> CrossSection {
        let circumradius = side / 3f64.sqrt();
        let verts = (0..3)
            .map(|k| {
                let a = std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * (k as f64) / 3.0;
                Vec2::new(circumradius * a.cos(), circumradius * a.sin())
            })
            .collect();
        CrossSection::convex_polygon(verts).expect("triangle is valid")
    }

    /// Reuleaux triangle of the given width as a polygon approximation with
    /// `pts_per_arc` segments per arc (3 arcs; 32 gives 96 vertices).
    pub fn reuleaux_triangle(width: f64, pts_per_arc: usize) -> CrossSection {
        let CrossSection::ConvexPolygon { vertices: corners } =
            Self::equilateral_triangle(width)
        else {
            unreachable!()
        };
        let mut verts = Vec::with_capacity(3 * pts_per_arc);
        for i in 0..3 {
            // Arc opposite corner i: centred on corner i, sweeping from the
            // next corner to the previous one (60 degrees).
            let center = corners[i];
            let from = corners[(i + 1) % 3] - center;
            let a0 = from.y.atan2(from.x);
            for k in 0..pts_per_arc {
                let a = a0 + std::f64::consts::FRAC_PI_3 * (k as f64) / (pts_per_arc as f64);
                verts.push(center + Vec2::new(width * a.cos(), width * a.sin()));
            }
        }
        CrossSection::convex_polygon(verts).expect("reuleaux polygonization is valid")
    }

    /// Equilateral triangle with one corner cut off: the top vertex is
    /// replaced by a chord at `cut` of the way down its two edges.
    pub fn truncated_triangle(side: f64, cut: f64) -> CrossSection {
        assert!(cut > 0.0 && cut < 1.0);
        let CrossSection::ConvexPolygon { vertices: c } = Self::equilateral_triangle(side) else {
            unreachable!()
        };
        // c[0] is the top vertex; cut points sit on edges c[0]->c[1] and
        // c[2]->c[0].
        let p1 = c[0] + (c[1] - c[0]) * cut;
        let p2 = c[0] + (c[2] - c[0]) * cut;
        CrossSection::convex_polygon(vec![p1, c[1], c[2], p2]).expect("truncation is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn builtin_has_the_six_shapes() {
        let cat = Catalogue::builtin();
        let names: Vec<&str> = cat.names().collect();
        assert_eq!(names, vec!["b-rtr", "b-trm", "cir", "rtr", "tr", "trm"]);
    }

    #[test]
    fn reuleaux_area_matches_formula() {
        // A = (pi - sqrt(3)) w^2 / 2, approached from below by the
        // inscribed polygon.
        let w = 30.0;
        let rtr = Catalogue::reuleaux_triangle(w, 32);
        let exact = (std::f64::consts::PI - 3f64.sqrt()) * w * w / 2.0;
        let got = rtr.area();
        assert!(got < exact && (exact - got) / exact < 1e-3, "got {got}, exact {exact}");
        // 96 vertices as documented.
        let CrossSection::ConvexPolygon { vertices } = &rtr else { panic!() };
        assert_eq!(vertices.len(), 96);
    }

    #[test]
    fn reuleaux_has_constant_width() {
        let w = 30.0;
        let CrossSection::ConvexPolygon { vertices } = Catalogue::reuleaux_triangle(w, 32)
        else {
            panic!()
        };
        // Support width in a few directions: max - min projection.
        for k in 0..12 {
            let a = std::f64::consts::PI * (k as f64) / 12.0;
            let d = Vec2::new(a.cos(), a.sin());
            let proj: Vec<f64> = vertices.iter().map(|v| v.dot(d)).collect();
            let width = proj.iter().fold(f64::MIN, |m, &p| m.max(p))
                - proj.iter().fold(f64::MAX, |m, &p| m.min(p));
            assert!((width - w).abs() < 0.02, "direction {k}: width {width}");
        }
    }

    #[test]
    fn truncated_triangle_area() {
        let t = Catalogue::truncated_triangle(30.0, 0.3);
        let full = 3f64.sqrt() / 4.0 * 900.0;
        assert_relative_eq!(t.area(), full * (1.0 - 0.09), epsilon = 1e-9);
    }

    #[test]
    fn big_variants_scale_by_four_thirds() {
        let cat = Catalogue::builtin();
        let ratio = cat.get("b-rtr").unwrap().area() / cat.get("rtr").unwrap().area();
        assert_relative_eq!(ratio, (4.0f64 / 3.0).powi(2), epsilon = 1e-9);
    }

    #[test]
    fn roundtrips_through_the_file_format() {
        let cat = Catalogue::builtin();
        let text = cat.to_toml_string();
        let parsed = Catalogue::from_toml_str(&text).unwrap();
        for name in cat.names() {
            let a = cat.get(name).unwrap();
            let b = parsed.get(name).unwrap();
            assert_relative_eq!(a.area(), b.area(), epsilon = 1e-9);
        }
    }

    #[test]
    fn parses_derived_entries() {
        let text = r#"
            [shapes.base]
            kind = "circle"
            radius = 10.0

            [shapes.big]
            kind = "derived"
            base = "base"
            scale = 2.0
        "#;
        let cat = Catalogue::from_toml_str(text).unwrap();
        assert_eq!(cat.get("big").unwrap(), &CrossSection::circle(20.0).unwrap());
    }

    #[test]
    fn rejects_unknown_base() {
        let text = r#"
            [shapes.bad]
            kind = "derived"
            base = "missing"
            scale = 2.0
        "#;
        assert!(matches!(
            Catalogue::from_toml_str(text),
            Err(CatalogueError::BadBase { .. })
        ));
    }

    #[test]
    fn shipped_catalogue_matches_builtin() {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/catalogue.toml");
        let shipped = Catalogue::from_path(&path).expect("assets/catalogue.toml must parse");
        let builtin = Catalogue::builtin();
        let a: Vec<&str> = shipped.names().collect();
        let b: Vec<&str> = builtin.names().collect();
        assert_eq!(a, b);
        for name in builtin.names() {
            assert_relative_eq!(
                shipped.get(name).unwrap().area(),
                builtin.get(name).unwrap().area(),
                epsilon = 1e-9
            );
        }
    }

    /// Regenerates the shipped catalogue asset. Run explicitly:
    /// `cargo test -p pih-core regen_catalogue -- --ignored`
    #[test]
    #[ignore]
    fn regen_catalogue() {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/catalogue.toml");
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        let mut text = String::from(
            "# Shape catalogue: the six standard cross-sections (millimetres).\n\
             # Regenerate with: cargo test -p pih-core regen_catalogue -- --ignored\n\n",
        );
        text.push_str(&Catalogue::builtin().to_toml_string());
        std::fs::write(&path, text).unwrap();
    }
}

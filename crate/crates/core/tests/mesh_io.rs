use std::collections::BTreeSet;

use regacd::mesh::{load_mesh, load_mesh_bytes, sample_surface, save_mesh, LoadOptions, MeshFormat};
use regacd::pipeline::{read_decomposition, write_decomposition, Decomposition, Manifest, MANIFEST_FILE};
use regacd::{fixtures, ConvexPart, Error, Point};

/// Binary STL written field by field, one unshared vertex triple per face.
fn stl_bytes(tris: &[[Point; 3]]) -> Vec<u8> {
    let mut out = vec![0u8; 80];
    out.extend((tris.len() as u32).to_le_bytes());
    for t in tris {
        out.extend([0f32; 3].iter().flat_map(|x| x.to_le_bytes()));
        for p in t {
            for k in 0..3 {
                out.extend((p[k] as f32).to_le_bytes());
            }
        }
        out.extend([0u8; 2]);
    }
    out
}

#[test]
fn obj_cube_loads_as_is() {
    let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n\
                f 1 4 3\nf 1 3 2\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\nf 2 3 7\nf 2 7 6\nf 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n";
    let mesh = load_mesh_bytes(text.as_bytes(), MeshFormat::Obj, LoadOptions::default()).unwrap();
    assert_eq!((mesh.vertices().len(), mesh.faces().len()), (8, 12));
    assert!(mesh.is_watertight());
    assert!((mesh.volume().unwrap() - 1.0).abs() < 1e-12);
    let bad = text.replace("f 4 5 8", "f 4 5 999");
    assert!(matches!(load_mesh_bytes(bad.as_bytes(), MeshFormat::Obj, LoadOptions::default()), Err(Error::Parse(_))));
}

#[test]
fn stl_soup_is_welded_to_distinct_coordinates() {
    for mesh in [fixtures::unit_cube(), fixtures::l_prism(), fixtures::dimpled_cube()] {
        let tris: Vec<[Point; 3]> = mesh.triangles().collect();
        let bytes = stl_bytes(&tris);
        assert_eq!(MeshFormat::detect(&bytes), MeshFormat::Stl);
        let loaded = load_mesh_bytes(&bytes, MeshFormat::Auto, LoadOptions::default()).unwrap();
        let distinct: BTreeSet<[u32; 3]> =
            tris.iter().flatten().map(|p| [0, 1, 2].map(|k| (p[k] as f32).to_bits())).collect();
        assert_eq!(loaded.vertices().len(), distinct.len());
        assert_eq!(loaded.faces().len(), tris.len());
        assert!(loaded.is_watertight());
    }
}

#[test]
fn save_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = fixtures::dumbbell().translated(&regacd::Vector::new(0.1234567, -3.3, 1e3));
    for (name, format) in [("m.obj", MeshFormat::Obj), ("m.stl", MeshFormat::Stl)] {
        let path = dir.path().join(name);
        save_mesh(&mesh, &path, format).unwrap();
        let back = load_mesh(&path, MeshFormat::Auto, LoadOptions::default()).unwrap();
        assert_eq!(back.faces().len(), mesh.faces().len());
        // The float32 STL grid at 1000 is about 6e-5 wide.
        let tol = if format == MeshFormat::Obj { 1e-6 } else { 1e-4 };
        for (a, b) in mesh.vertices().iter().zip(back.vertices()) {
            assert!((a - b).amax() <= tol, "{name}: {a} {b}");
        }
    }
    let blocked = dir.path().join("missing").join("m.obj");
    assert!(matches!(save_mesh(&mesh, &blocked, MeshFormat::Obj), Err(Error::Io { .. })));
}

#[test]
fn open_surfaces_need_force() {
    let cube = fixtures::unit_cube();
    let open = regacd::TriangleMesh::new(cube.vertices().to_vec(), cube.faces()[1..].to_vec()).unwrap();
    let report = open.validate();
    assert!(!report.watertight);
    assert_eq!(report.boundary_edges, 3);
    let text = regacd::mesh::write_obj(&open);
    assert!(matches!(load_mesh_bytes(text.as_bytes(), MeshFormat::Obj, LoadOptions::default()), Err(Error::NotWatertight { .. })));
    assert!(load_mesh_bytes(text.as_bytes(), MeshFormat::Obj, LoadOptions { force: true }).is_ok());
}

#[test]
fn volume_laws() {
    let cube = fixtures::unit_cube();
    assert!((cube.scaled(2.0).volume().unwrap() - 8.0).abs() < 1e-9);
    assert!((fixtures::l_prism().volume().unwrap() - 3.0).abs() < 1e-9);
    let moved = fixtures::dumbbell().translated(&regacd::Vector::new(5.0, -7.0, 11.0));
    assert!((moved.volume().unwrap() - fixtures::dumbbell().volume().unwrap()).abs() < 1e-9);
}

#[test]
fn cube_faces_share_samples_evenly() {
    let cube = fixtures::unit_cube();
    let n = 6000;
    let cloud = sample_surface(&cube, n, 42).unwrap();
    let mut per_side = [0usize; 6];
    for (p, &f) in cloud.points.iter().zip(&cloud.source_face) {
        let [a, b, c] = cube.triangle(f);
        let normal = (b - a).cross(&(c - a)).normalize();
        let axis = normal.iamax();
        per_side[2 * axis + usize::from(normal[axis] > 0.0)] += 1;
        assert!(((p - a).dot(&normal)).abs() < 1e-9);
    }
    // Multinomial with p = 1/6: σ = sqrt(n p (1 - p)).
    let sigma = (n as f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
    for c in per_side {
        assert!((c as f64 - 1000.0).abs() <= 3.0 * sigma, "{per_side:?}");
    }
    let a = sample_surface(&cube, 1, 9).unwrap();
    assert_eq!(a, sample_surface(&cube, 1, 9).unwrap());
}

#[test]
fn thousand_part_manifest() {
    let mut parts = Vec::new();
    for i in 0..10 {
        for j in 0..10 {
            for k in 0..10 {
                let min = [i as f64, j as f64, k as f64];
                let max = [i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5];
                parts.push(ConvexPart::from_mesh(&fixtures::box_mesh(min, max)).unwrap());
            }
        }
    }
    let decomp = Decomposition::from_parts(parts);
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = write_decomposition(&decomp, dir.path()).unwrap();
    assert_eq!(manifest_path, dir.path().join(MANIFEST_FILE));

    let files: BTreeSet<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(files.len(), 1001);
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest.parts.len(), 1000);
    let listed: BTreeSet<String> = manifest.parts.iter().map(|p| p.file.clone()).collect();
    assert_eq!(listed.len(), 1000);
    assert!(listed.iter().all(|f| files.contains(f)));

    let back = read_decomposition(dir.path()).unwrap();
    assert_eq!(back.parts.len(), 1000);
    assert_eq!(back.fingerprint(), decomp.fingerprint());
    for (a, b) in back.parts.iter().zip(&decomp.parts) {
        assert!((a.part.volume() - 0.125).abs() < 1e-12 && (b.part.volume() - 0.125).abs() < 1e-12);
    }
}

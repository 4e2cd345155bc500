"""STL and OBJ import/export.

STL files are unitless; callers may declare the file's units ("m" or "mm")
and positions are converted to meters at the boundary. Export splits a
tagged mesh into one binary STL per material (suffixes _structural,
_conductive, _flexible) or a single OBJ with material groups.
"""

import struct
from pathlib import Path

import numpy as np

from .mesh import Material, TriMesh

_UNIT_SCALE = {"m": 1.0, "meters": 1.0, "mm": 1e-3, "millimeters": 1e-3}


def _scale_for(units):
    try:
        return _UNIT_SCALE[units.lower()]
    except KeyError:
        raise ValueError(f"unknown units {units!r}; expected one of {sorted(_UNIT_SCALE)}")


def _weld(triangles):
    """Weld exactly-equal vertices of a triangle soup into an indexed mesh."""
    flat = triangles.reshape(-1, 3)
    verts, inverse = np.unique(flat, axis=0, return_inverse=True)
    faces = inverse.reshape(-1, 3)
    return verts, faces


def load_stl(path, units="m", material=Material.STRUCTURAL):
    data = Path(path).read_bytes()
    if data[:5] == b"solid" and b"facet" in data[:400]:
        tris = _parse_ascii_stl(data.decode("ascii", errors="replace"))
    else:
        tris = _parse_binary_stl(data)
    tris = tris * _scale_for(units)
    verts, faces = _weld(tris)
    return TriMesh.from_arrays(verts, faces, material)


def _parse_binary_stl(data):
    if len(data) < 84:
        raise ValueError("binary STL truncated: missing header")
    (count,) = struct.unpack_from("<I", data, 80)
    expected = 84 + count * 50
    if len(data) < expected:
        raise ValueError(f"binary STL truncated: {len(data)} bytes, expected {expected}")
    records = np.frombuffer(data, dtype=np.uint8, count=count * 50, offset=84)
    records = records.reshape(count, 50)
    floats = records[:, :48].copy().view("<f4").reshape(count, 12)
    return floats[:, 3:12].astype(np.float64).reshape(count, 3, 3)


def _parse_ascii_stl(text):
    tris = []
    current = []
    for line in text.splitlines():
        parts = line.split()
        if parts[:1] == ["vertex"]:
            current.append([float(parts[1]), float(parts[2]), float(parts[3])])
            if len(current) == 3:
                tris.append(current)
                current = []
    if not tris:
        raise ValueError("ASCII STL contains no vertices")
    return np.array(tris, dtype=np.float64)


def save_stl(mesh: TriMesh, path, units="m"):
    """Write a single binary STL containing every face of the mesh."""
    scale = 1.0 / _scale_for(units)
    tris = (mesh.triangles() * scale).astype("<f4")
    normals = mesh.face_normals().astype("<f4")
    out = bytearray()
    header = b"hybridskin binary stl"
    out += header + b"\0" * (80 - len(header))
    out += struct.pack("<I", mesh.n_faces)
    for i in range(mesh.n_faces):
        out += normals[i].tobytes()
        out += tris[i].tobytes()
        out += b"\0\0"
    Path(path).write_bytes(bytes(out))


def save_stl_ascii(mesh: TriMesh, path, units="m", name="hybridskin"):
    scale = 1.0 / _scale_for(units)
    tris = mesh.triangles() * scale
    normals = mesh.face_normals()
    lines = [f"solid {name}"]
    for i in range(mesh.n_faces):
        n = normals[i]
        lines.append(f"  facet normal {n[0]:.9e} {n[1]:.9e} {n[2]:.9e}")
        lines.append("    outer loop")
        for v in tris[i]:
            lines.append(f"      vertex {v[0]:.9e} {v[1]:.9e} {v[2]:.9e}")
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append(f"endsolid {name}")
    Path(path).write_text("\n".join(lines) + "\n")


def save_stl_per_material(mesh: TriMesh, base_path, units="m"):
    """Write one binary STL per material present; returns {Material: path}."""
    base = Path(base_path)
    written = {}
    for mat in Material:
        sel = mesh.face_material == int(mat)
        if not np.any(sel):
            continue
        sub = TriMesh(mesh.vertices.copy(), mesh.faces[sel], mesh.face_material[sel])
        path = base.with_name(base.stem + mat.suffix + ".stl")
        save_stl(sub, path, units=units)
        written[mat] = path
    return written


def load_obj(path, units="m", material=Material.STRUCTURAL):
    """Positions and triangle faces only; groups/normals/uvs are ignored."""
    scale = _scale_for(units)
    verts = []
    faces = []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(parts[1]) * scale, float(parts[2]) * scale,
                          float(parts[3]) * scale])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) for p in parts[1:]]
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                faces.append([idx[0], idx[k], idx[k + 1]])
    if not faces:
        raise ValueError(f"OBJ {path} contains no faces")
    return TriMesh.from_arrays(np.array(verts), faces, material)


def save_obj(mesh: TriMesh, path, units="m"):
    """Single OBJ with faces grouped by material (usemtl per group)."""
    scale = 1.0 / _scale_for(units)
    lines = ["# hybridskin OBJ export"]
    for v in mesh.vertices * scale:
        lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    for mat in Material:
        sel = mesh.face_material == int(mat)
        if not np.any(sel):
            continue
        lines.append(f"g {mat.name.lower()}")
        lines.append(f"usemtl {mat.name.lower()}")
        for f in mesh.faces[sel]:
            lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_mesh(path, units="m", material=Material.STRUCTURAL):
    """Load by extension: .stl (binary or ASCII) or .obj."""
    suffix = Path(path).suffix.lower()
    if suffix == ".stl":
        return load_stl(path, units=units, material=material)
    if suffix == ".obj":
        return load_obj(path, units=units, material=material)
    raise ValueError(f"unsupported mesh format {suffix!r} (use .stl or .obj)")

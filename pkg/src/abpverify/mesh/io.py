"""ASCII OFF and OBJ readers and writers (positions and connectivity only)."""

import numpy as np

from .core import CurveMesh, DomainMesh, MeshError, SurfaceMesh


class MeshParseError(MeshError):
    """Malformed mesh file; carries the offending line number."""

    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


def _build(path, verts, faces, lines):
    v = np.array(verts, dtype=float)
    if faces and lines:
        raise MeshError(f"{path}: mixes faces and polylines")
    if lines:
        closed = len(lines) > 1 and lines[-1][1] == lines[0][0]
        order = [a for a, _ in lines] + ([] if closed else [lines[-1][1]])
        return CurveMesh(v[order], closed=closed, name=str(path))
    if not faces:
        raise MeshError(f"{path}: no faces")
    t = np.array(faces, dtype=np.int64)
    if v.shape[1] == 3 and np.all(v[:, 2] == 0):
        return DomainMesh(v[:, :2], t, name=str(path))
    if v.shape[1] == 2:
        return DomainMesh(v, t, name=str(path))
    return SurfaceMesh(v, t, name=str(path))


def _tokens(path):
    with open(path) as fh:
        for no, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield no, line.split()


def read_off(path):
    """Read OFF (3D) or nOFF (header line gives the dimension)."""
    it = _tokens(path)
    try:
        no, head = next(it)
    except StopIteration:
        raise MeshParseError(path, 1, "empty file") from None
    dim = 3
    if head[0] == "nOFF":
        try:
            no, tok = next(it)
            dim = int(tok[0])
        except (StopIteration, ValueError):
            raise MeshParseError(path, no, "nOFF needs a dimension line") from None
    elif head[0] != "OFF":
        raise MeshParseError(path, no, f"expected OFF header, got {head[0]!r}")
    head = head[1:] if len(head) > 1 else None
    if head is None:
        try:
            no, head = next(it)
        except StopIteration:
            raise MeshParseError(path, no, "missing element counts") from None
    try:
        nv, nf = int(head[0]), int(head[1])
    except (IndexError, ValueError):
        raise MeshParseError(path, no, "bad element counts") from None
    verts, faces = [], []
    for _ in range(nv):
        try:
            no, tok = next(it)
            verts.append([float(x) for x in tok[:dim]])
        except StopIteration:
            raise MeshParseError(path, no, "unexpected end of vertex list") from None
        except ValueError:
            raise MeshParseError(path, no, "bad vertex coordinate") from None
        if len(verts[-1]) != dim:
            raise MeshParseError(path, no, f"vertex needs {dim} coordinates")
    for _ in range(nf):
        try:
            no, tok = next(it)
            k = int(tok[0])
            idx = [int(x) for x in tok[1:1 + k]]
        except StopIteration:
            raise MeshParseError(path, no, "unexpected end of face list") from None
        except ValueError:
            raise MeshParseError(path, no, "bad face index") from None
        if k != 3 or len(idx) != 3:
            raise MeshParseError(path, no, "only triangles are supported")
        if min(idx) < 0 or max(idx) >= nv:
            raise MeshParseError(path, no, f"vertex index out of range 0..{nv - 1}")
        faces.append(idx)
    return _build(path, verts, faces, [])


def read_obj(path):
    """Read OBJ ``v``/``f``/``l`` records; any number of coordinates per vertex."""
    verts, faces, lines = [], [], []
    pending = []
    for no, tok in _tokens(path):
        kind = tok[0]
        try:
            if kind == "v":
                verts.append([float(x) for x in tok[1:]])
            elif kind in ("f", "l"):
                idx = [int(x.split("/")[0]) for x in tok[1:]]
                pending.append((no, kind, idx))
        except ValueError:
            raise MeshParseError(path, no, f"malformed {kind!r} record") from None
    if len({len(v) for v in verts}) > 1:
        raise MeshParseError(path, 1, "vertices with differing coordinate counts")
    nv = len(verts)
    for no, kind, idx in pending:
        idx = [i - 1 if i > 0 else nv + i for i in idx]
        if any(i < 0 or i >= nv for i in idx):
            raise MeshParseError(path, no, f"vertex index out of range 1..{nv}")
        if kind == "f":
            if len(idx) != 3:
                raise MeshParseError(path, no, "only triangles are supported")
            faces.append(idx)
        else:
            lines += list(zip(idx[:-1], idx[1:]))
    return _build(path, verts, faces, lines)


def load_mesh(path, format=None):
    fmt = (format or str(path).rsplit(".", 1)[-1]).upper()
    if fmt == "OFF":
        return read_off(path)
    if fmt == "OBJ":
        return read_obj(path)
    raise MeshError(f"unsupported mesh format {fmt!r}")


def save_mesh(mesh, path, format=None):
    fmt = (format or str(path).rsplit(".", 1)[-1]).upper()
    v = mesh.vertices
    with open(path, "w") as fh:
        if fmt == "OFF":
            if isinstance(mesh, CurveMesh):
                raise MeshError("OFF cannot store curves; use OBJ")
            if v.shape[1] == 2:
                v = np.hstack([v, np.zeros((len(v), 1))])
            if v.shape[1] == 3:
                fh.write("OFF\n")
            else:
                fh.write(f"nOFF\n{v.shape[1]}\n")
            fh.write(f"{len(v)} {len(mesh.triangles)} 0\n")
            for p in v:
                fh.write(" ".join(repr(float(x)) for x in p) + "\n")
            for a, b, c in mesh.triangles:
                fh.write(f"3 {a} {b} {c}\n")
        elif fmt == "OBJ":
            for p in v:
                fh.write("v " + " ".join(repr(float(x)) for x in p) + "\n")
            if isinstance(mesh, CurveMesh):
                idx = list(range(1, len(v) + 1)) + ([1] if mesh.closed else [])
                fh.write("l " + " ".join(map(str, idx)) + "\n")
            else:
                for a, b, c in mesh.triangles:
                    fh.write(f"f {a + 1} {b + 1} {c + 1}\n")
        else:
            raise MeshError(f"unsupported mesh format {fmt!r}")

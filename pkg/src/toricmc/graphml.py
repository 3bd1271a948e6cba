"""GraphML export of measurement snapshots.

One file holds the whole run: nodes are lattice vertices (with their cell
coordinates and sublattice), edges are links, and every edge carries the
space-separated list of its spins across all snapshots; the first spin
belongs to the first snapshot.  Snapshots are buffered in memory during
the run and written once at the end.  The XML follows the GraphML schema
so generic graph libraries can read it back.
"""

from __future__ import annotations

import os
import tempfile
import warnings
import xml.etree.ElementTree as ET

from .errors import ConfigurationError
from .lattice import Lattice

SNAPSHOT_FILENAME = "snapshots.graphml"

_GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"

_GRAPH_ATTRS = ("basis", "lattice_type", "system_size", "boundaries", "beta",
                "mu", "h", "J", "lmbda", "N_samples")


def write_snapshots(snapshots, lattice: Lattice, metadata: dict, path) -> None:
    """Write all snapshots of one run into a single GraphML file.

    `snapshots` is a sequence of per-link +-1 vectors; `metadata` should
    carry the graph-level attributes (basis, couplings, ...).  With zero
    snapshots a warning is emitted and no file is written.
    """
    if not snapshots:
        warnings.warn("snapshot saving requested but no snapshots were taken; "
                      "no file written", stacklevel=2)
        return
    n_links = lattice.n_links
    for s in snapshots:
        if len(s) != n_links:
            raise ConfigurationError("snapshot length does not match the lattice")

    ET.register_namespace("", _GRAPHML_NS)
    root = ET.Element(f"{{{_GRAPHML_NS}}}graphml")

    keys = {}

    def declare_key(name, domain, attr_type):
        kid = f"d{len(keys)}"
        keys[(domain, name)] = kid
        ET.SubElement(root, f"{{{_GRAPHML_NS}}}key", id=kid,
                      attrib={"for": domain, "attr.name": name,
                              "attr.type": attr_type})
        return kid

    for name in _GRAPH_ATTRS:
        value = metadata.get(name)
        attr_type = "string" if isinstance(value, str) else (
            "long" if isinstance(value, int) else "double")
        declare_key(name, "graph", attr_type)
    coord_names = ("cx", "cy", "cz")[: lattice.dim]
    for cname in coord_names:
        declare_key(cname, "node", "long")
    declare_key("sublattice", "node", "long")
    declare_key("spins", "edge", "string")

    graph = ET.SubElement(root, f"{{{_GRAPHML_NS}}}graph",
                          id="snapshots", edgedefault="undirected")

    def data(parent, domain, name, value):
        el = ET.SubElement(parent, f"{{{_GRAPHML_NS}}}data",
                           key=keys[(domain, name)])
        el.text = str(value)

    for name in _GRAPH_ATTRS:
        if name in metadata:
            data(graph, "graph", name, metadata[name])

    for v in lattice.vertices:
        node = ET.SubElement(graph, f"{{{_GRAPHML_NS}}}node", id=f"n{v.id}")
        for cname, coord in zip(coord_names, v.cell):
            data(node, "node", cname, coord)
        data(node, "node", "sublattice", v.sublattice)

    for lk in lattice.links:
        edge = ET.SubElement(graph, f"{{{_GRAPHML_NS}}}edge", id=f"e{lk.id}",
                             source=f"n{lk.u}", target=f"n{lk.v}")
        data(edge, "edge", "spins", " ".join(str(int(s[lk.id])) for s in snapshots))

    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    tree = ET.ElementTree(root)
    ET.indent(tree)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".snapshots-")
    try:
        with os.fdopen(fd, "wb") as fh:
            tree.write(fh, encoding="utf-8", xml_declaration=True)
        os.replace(tmp, path)
    except OSError as err:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise OSError(f"cannot write snapshot file {path}: {err}") from err


def read_snapshots(path):
    """Parse a snapshot file back to (spins per snapshot, graph metadata).

    Returns (snapshots, metadata) where snapshots is a list of per-link
    spin lists ordered by edge id and metadata holds the graph-level
    attributes as strings.
    """
    tree = ET.parse(path)
    root = tree.getroot()
    ns = {"g": _GRAPHML_NS}
    key_names = {k.get("id"): k.get("attr.name") for k in root.findall("g:key", ns)}
    graph = root.find("g:graph", ns)
    metadata = {}
    for d in graph.findall("g:data", ns):
        metadata[key_names[d.get("key")]] = d.text
    edges = []
    for edge in graph.findall("g:edge", ns):
        eid = int(edge.get("id")[1:])
        spins = None
        for d in edge.findall("g:data", ns):
            if key_names[d.get("key")] == "spins":
                spins = [int(tok) for tok in d.text.split()]
        edges.append((eid, spins))
    edges.sort()
    per_edge = [spins for _, spins in edges]
    n_snapshots = len(per_edge[0]) if per_edge else 0
    snapshots = [[per_edge[e][i] for e in range(len(per_edge))]
                 for i in range(n_snapshots)]
    return snapshots, metadata

"""Read the node/way subset of OpenStreetMap XML and cut road assets from it."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .assets import AssetError, RoadAsset, simplify_nodes, validate_asset
from .geometry import Point2

EARTH_RADIUS = 6_371_000.0
DEFAULT_SIMPLIFY_TOL = 1.0


class OsmError(ValueError):
    pass


class OsmParseError(OsmError):
    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")
        self.offset = offset


class OsmReferenceError(OsmError):
    def __init__(self, way: str, ref: str):
        super().__init__(f"way {way} references missing node {ref}")
        self.way = way
        self.ref = ref


@dataclass
class Way:
    id: str
    refs: list[str]
    tags: dict[str, str] = field(default_factory=dict)

    @property
    def is_highway(self) -> bool:
        return "highway" in self.tags


@dataclass
class RawOsmGraph:
    nodes: dict[str, tuple[float, float]] = field(default_factory=dict)  # id -> (lat, lon)
    ways: list[Way] = field(default_factory=list)

    def way(self, way_id: str) -> Way:
        for w in self.ways:
            if w.id == str(way_id):
                return w
        raise OsmError(f"no way with id {way_id}")

    def ways_in_bbox(self, min_lat: float, min_lon: float, max_lat: float, max_lon: float) -> list[str]:
        """Ids of ways with every node inside the lat/lon box."""
        out = []
        for w in self.ways:
            if all(
                min_lat <= self.nodes[r][0] <= max_lat and min_lon <= self.nodes[r][1] <= max_lon for r in w.refs
            ):
                out.append(w.id)
        return out


def _byte_offset(data: bytes, line: int, column: int) -> int:
    lines = data.split(b"\n")
    return sum(len(x) + 1 for x in lines[: line - 1]) + column


def parse_osm(xml_bytes: bytes | str) -> RawOsmGraph:
    if isinstance(xml_bytes, str):
        xml_bytes = xml_bytes.encode("utf-8")
    try:
        root = ET.fromstring(xml_bytes)
    except ET.ParseError as exc:
        line, col = exc.position
        raise OsmParseError(f"malformed OSM XML: {exc}", _byte_offset(xml_bytes, line, col)) from exc
    graph = RawOsmGraph()
    for el in root.iter("node"):
        nid = el.get("id")
        try:
            lat, lon = float(el.get("lat")), float(el.get("lon"))
        except (TypeError, ValueError) as exc:
            raise OsmParseError(f"node {nid} lacks a numeric lat/lon") from exc
        if nid is None:
            raise OsmParseError("node without id")
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise OsmParseError(f"node {nid} has out-of-range coordinates ({lat}, {lon})")
        graph.nodes[nid] = (lat, lon)
    for el in root.iter("way"):
        wid = el.get("id")
        if wid is None:
            raise OsmParseError("way without id")
        refs = [nd.get("ref") for nd in el.findall("nd")]
        for r in refs:
            if r not in graph.nodes:
                raise OsmReferenceError(wid, str(r))
        tags = {t.get("k"): t.get("v") for t in el.findall("tag") if t.get("k") is not None}
        graph.ways.append(Way(wid, refs, tags))
    return graph


def to_osm_xml(graph: RawOsmGraph) -> bytes:
    """Serialize the supported subset (node, way, nd, tag)."""
    root = ET.Element("osm", version="0.6", generator="xcity")
    for nid, (lat, lon) in graph.nodes.items():
        ET.SubElement(root, "node", id=nid, lat=repr(lat), lon=repr(lon))
    for w in graph.ways:
        el = ET.SubElement(root, "way", id=w.id)
        for r in w.refs:
            ET.SubElement(el, "nd", ref=r)
        for k, v in w.tags.items():
            ET.SubElement(el, "tag", k=k, v=v)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


def project_local(graph: RawOsmGraph, node_ids: Iterable[str] | None = None) -> dict[str, Point2]:
    """Equirectangular projection in meters about the centroid of the nodes."""
    ids = list(graph.nodes) if node_ids is None else list(node_ids)
    if not ids:
        raise OsmError("cannot project an empty node set")
    lat0 = sum(graph.nodes[i][0] for i in ids) / len(ids)
    lon0 = sum(graph.nodes[i][1] for i in ids) / len(ids)
    k = math.cos(math.radians(lat0))
    out = {}
    for i in ids:
        lat, lon = graph.nodes[i]
        out[i] = Point2(
            EARTH_RADIUS * k * math.radians(lon - lon0),
            EARTH_RADIUS * math.radians(lat - lat0),
        )
    return out


def haversine(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance in meters between two (lat, lon) pairs."""
    p1, p2 = math.radians(a[0]), math.radians(b[0])
    dp = p2 - p1
    dl = math.radians(b[1] - a[1])
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS * math.asin(math.sqrt(h))


def extract_asset(
    graph: RawOsmGraph,
    way_ids: Sequence[str],
    simplify_tol: float = DEFAULT_SIMPLIFY_TOL,
    id: str = "asset",
    value: float = 1.0,
    scenario_tags: Sequence[str] = (),
) -> RoadAsset:
    """Build one asset from the union of the selected ways.

    Ways are split at nodes they share with other selected ways, each piece is
    down-sampled on its own, and nodes are merged by OSM id. The result is
    recentered so the node centroid sits at the origin.
    """
    if not way_ids:
        raise OsmError("no ways selected")
    ways = [graph.way(w) for w in way_ids]
    proj = project_local(graph, sorted({r for w in ways for r in w.refs}))
    counts: dict[str, int] = {}
    for w in ways:
        for r in set(w.refs):
            counts[r] = counts.get(r, 0) + 1

    node_index: dict[str, int] = {}
    nodes: list[Point2] = []
    segments: set[tuple[int, int]] = set()

    def index_of(ref: str) -> int:
        if ref not in node_index:
            node_index[ref] = len(nodes)
            nodes.append(proj[ref])
        return node_index[ref]

    for w in ways:
        refs = [r for k, r in enumerate(w.refs) if k == 0 or r != w.refs[k - 1]]
        if len(refs) < 2:
            continue
        # split points: ends and nodes shared with another selected way
        cuts = [0] + [k for k in range(1, len(refs) - 1) if counts[refs[k]] > 1] + [len(refs) - 1]
        for lo, hi in zip(cuts, cuts[1:]):
            piece = refs[lo : hi + 1]
            kept = simplify_nodes([proj[r] for r in piece], simplify_tol)
            # map kept points back to refs, in order
            keep_refs, k = [], 0
            for r in piece:
                if k < len(kept) and proj[r] == kept[k]:
                    keep_refs.append(r)
                    k += 1
            for a, b in zip(keep_refs, keep_refs[1:]):
                i, j = index_of(a), index_of(b)
                if i != j:
                    segments.add((min(i, j), max(i, j)))

    if not nodes:
        raise OsmError(f"ways {list(way_ids)} contain no usable geometry")
    cx = sum(p.x for p in nodes) / len(nodes)
    cy = sum(p.y for p in nodes) / len(nodes)
    asset = RoadAsset(
        id=id,
        nodes=[(p.x - cx, p.y - cy) for p in nodes],
        segments=sorted(segments),
        value=value,
        scenario_tags=scenario_tags,
    )
    problems = validate_asset(asset)
    if problems:
        raise AssetError(f"asset {id!r} from ways {list(way_ids)} is invalid: " + "; ".join(map(str, problems)), problems)
    return asset


def load_osm(path) -> RawOsmGraph:
    with open(path, "rb") as fh:
        return parse_osm(fh.read())


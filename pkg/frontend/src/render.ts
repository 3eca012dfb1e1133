import type {
  GridInfo,
  NetworkInfo,
  Point,
  QueryDraft,
  ResultOverlay,
} from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface MapHandlers {
  onSegmentClick?: (id: number) => void;
  onCellClick?: (id: number) => void;
  onCanvasClick?: (p: Point) => void;
}

/** SVG map of the abstract road network: paintable grid cells underneath,
 * selectable segment polylines on top, then query sketch and result
 * overlays. No real-world tiles; the data is synthetic map units. */
export class MapView {
  private gridLayer: SVGGElement;
  private networkLayer: SVGGElement;
  private sketchLayer: SVGGElement;
  private resultLayer: SVGGElement;
  private flipY: (y: number) => number;

  constructor(
    private doc: Document,
    private svg: SVGSVGElement,
    private network: NetworkInfo,
    private grid: GridInfo,
    private handlers: MapHandlers = {},
  ) {
    const pad = 0.05 * Math.max(grid.max_x - grid.min_x, grid.max_y - grid.min_y);
    const minX = grid.min_x - pad;
    const minY = grid.min_y - pad;
    const w = grid.max_x - grid.min_x + 2 * pad;
    const h = grid.max_y - grid.min_y + 2 * pad;
    // svg y grows downward; map y grows upward
    this.flipY = (y) => grid.min_y + grid.max_y - y;
    svg.setAttribute("viewBox", `${minX} ${minY} ${w} ${h}`);
    this.gridLayer = this.layer("grid-layer");
    this.networkLayer = this.layer("network-layer");
    this.resultLayer = this.layer("result-layer");
    this.sketchLayer = this.layer("sketch-layer");
    this.drawGrid();
    this.drawNetwork();
    this.svg.addEventListener("click", (ev) => this.canvasClick(ev as MouseEvent));
  }

  private layer(name: string): SVGGElement {
    const g = this.doc.createElementNS(SVG_NS, "g") as SVGGElement;
    g.setAttribute("class", name);
    this.svg.appendChild(g);
    return g;
  }

  private drawGrid(): void {
    const { rows, cols } = this.grid;
    const cw = (this.grid.max_x - this.grid.min_x) / cols;
    const ch = (this.grid.max_y - this.grid.min_y) / rows;
    for (let r = 0; r < rows; r++) {
      for (let c = 0; c < cols; c++) {
        const rect = this.doc.createElementNS(SVG_NS, "rect");
        const cellId = r * cols + c;
        rect.setAttribute("class", "grid-cell");
        rect.setAttribute("data-cell-id", String(cellId));
        rect.setAttribute("x", String(this.grid.min_x + c * cw));
        // row r spans [min_y + r*ch, min_y + (r+1)*ch] in map units
        rect.setAttribute("y", String(this.flipY(this.grid.min_y + (r + 1) * ch)));
        rect.setAttribute("width", String(cw));
        rect.setAttribute("height", String(ch));
        rect.addEventListener("click", (ev) => {
          ev.stopPropagation();
          this.handlers.onCellClick?.(cellId);
        });
        this.gridLayer.appendChild(rect);
      }
    }
  }

  private drawNetwork(): void {
    this.network.segments.forEach(([a, b], segmentId) => {
      const [ax, ay] = this.network.nodes[a];
      const [bx, by] = this.network.nodes[b];
      const line = this.doc.createElementNS(SVG_NS, "line");
      line.setAttribute("class", "segment");
      line.setAttribute("data-segment-id", String(segmentId));
      line.setAttribute("x1", String(ax));
      line.setAttribute("y1", String(this.flipY(ay)));
      line.setAttribute("x2", String(bx));
      line.setAttribute("y2", String(this.flipY(by)));
      line.addEventListener("click", (ev) => {
        ev.stopPropagation();
        this.handlers.onSegmentClick?.(segmentId);
      });
      this.networkLayer.appendChild(line);
    });
  }

  private canvasClick(ev: MouseEvent): void {
    if (!this.handlers.onCanvasClick) return;
    const pt = this.clientToMap(ev);
    if (pt) this.handlers.onCanvasClick(pt);
  }

  private clientToMap(ev: MouseEvent): Point | null {
    const rect = this.svg.getBoundingClientRect();
    if (rect.width === 0 || rect.height === 0) return null;
    const vb = this.svg.viewBox.baseVal;
    const x = vb.x + ((ev.clientX - rect.left) / rect.width) * vb.width;
    const yDown = vb.y + ((ev.clientY - rect.top) / rect.height) * vb.height;
    return [x, this.flipY(yDown)];
  }

  /** Reflect the draft: selected segments and painted cells stay lit. */
  setDraft(draft: QueryDraft): void {
    const roads = new Set(draft.roadIds);
    for (const el of Array.from(this.networkLayer.children)) {
      const id = Number(el.getAttribute("data-segment-id"));
      el.classList.toggle("selected", roads.has(id));
    }
    const cells = new Set(draft.regionIds);
    for (const el of Array.from(this.gridLayer.children)) {
      const id = Number(el.getAttribute("data-cell-id"));
      el.classList.toggle("painted", cells.has(id));
    }
    this.renderSketch(draft.topologyPoints);
  }

  private renderSketch(points: Point[]): void {
    this.sketchLayer.replaceChildren();
    if (points.length > 1) {
      const poly = this.doc.createElementNS(SVG_NS, "polyline");
      poly.setAttribute("class", "sketch-line");
      poly.setAttribute(
        "points",
        points.map(([x, y]) => `${x},${this.flipY(y)}`).join(" "),
      );
      this.sketchLayer.appendChild(poly);
    }
    for (const [x, y] of points) {
      const dot = this.doc.createElementNS(SVG_NS, "circle");
      dot.setAttribute("class", "sketch-point");
      dot.setAttribute("cx", String(x));
      dot.setAttribute("cy", String(this.flipY(y)));
      dot.setAttribute("r", "0.08");
      this.sketchLayer.appendChild(dot);
    }
  }

  /** Replace previous results: one polyline per retrieved trajectory with
   * opacity descending by rank and a score label at the midpoint. */
  renderResults(overlays: ResultOverlay[]): void {
    this.resultLayer.replaceChildren();
    for (const overlay of overlays) {
      const group = this.doc.createElementNS(SVG_NS, "g");
      group.setAttribute("class", "result");
      group.setAttribute("data-result-id", String(overlay.id));
      group.setAttribute("data-rank", String(overlay.rank));
      const opacity = Math.max(0.25, 1.0 - 0.15 * (overlay.rank - 1));
      const poly = this.doc.createElementNS(SVG_NS, "polyline");
      poly.setAttribute("class", "result-line");
      poly.setAttribute("stroke-opacity", String(opacity));
      poly.setAttribute(
        "points",
        overlay.trajectory.points
          .map(([x, y]) => `${x},${this.flipY(y)}`)
          .join(" "),
      );
      group.appendChild(poly);

      const mid = overlay.trajectory.points[
        Math.floor(overlay.trajectory.points.length / 2)
      ];
      const label = this.doc.createElementNS(SVG_NS, "text");
      label.setAttribute("class", "result-label");
      label.setAttribute("x", String(mid[0]));
      label.setAttribute("y", String(this.flipY(mid[1])));
      label.textContent = `#${overlay.rank} ${overlay.score.toFixed(3)}`;
      group.appendChild(label);
      this.resultLayer.appendChild(group);
    }
  }

  clearResults(): void {
    this.resultLayer.replaceChildren();
  }

  segmentCount(): number {
    return this.networkLayer.children.length;
  }

  cellCount(): number {
    return this.gridLayer.children.length;
  }

  resultCount(): number {
    return this.resultLayer.children.length;
  }
}

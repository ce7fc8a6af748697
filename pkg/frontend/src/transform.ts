/**
 * World <-> screen affine transform. World is meters, y up; screen is
 * pixels, y down. The viewport fits the scenario bounds with a margin
 * and keeps the aspect ratio square.
 */
export class Viewport {
  scale = 1; // px per meter
  offsetX = 0;
  offsetY = 0;

  fit(bounds: number[][], width: number, height: number, marginPx = 24): void {
    const xs = bounds.map((p) => p[0]);
    const ys = bounds.map((p) => p[1]);
    const minX = Math.min(...xs);
    const maxX = Math.max(...xs);
    const minY = Math.min(...ys);
    const maxY = Math.max(...ys);
    const spanX = Math.max(maxX - minX, 1e-6);
    const spanY = Math.max(maxY - minY, 1e-6);
    this.scale = Math.min(
      (width - 2 * marginPx) / spanX,
      (height - 2 * marginPx) / spanY,
    );
    // center the bounds in the canvas
    const cx = (minX + maxX) / 2;
    const cy = (minY + maxY) / 2;
    this.offsetX = width / 2 - cx * this.scale;
    this.offsetY = height / 2 + cy * this.scale;
  }

  worldToScreen(x: number, y: number): [number, number] {
    return [x * this.scale + this.offsetX, this.offsetY - y * this.scale];
  }

  screenToWorld(px: number, py: number): [number, number] {
    return [(px - this.offsetX) / this.scale, (this.offsetY - py) / this.scale];
  }
}

/**
 * Top-down 2D view drawn purely from server payloads: corridor bounds,
 * actors colored by side and kind, the subject car with a heading
 * indicator, and a speed readout. World +y (the road axis, heading 0)
 * points up-screen; positive heading turns rightward / clockwise.
 */

import type { ActorPayload, ScenarioStartMsg, StateMsg } from './protocol.js'

export interface Viewport {
  toX(worldX: number): number
  toY(worldY: number): number
  scale: number
}

export function makeViewport(
  layout: ScenarioStartMsg,
  width: number,
  height: number,
  margin = 20,
): Viewport {
  const minX = layout.corridor.x_min - 1
  const maxX = layout.corridor.x_max + 1
  const minY = Math.min(layout.spawn.y, 0) - 2
  const maxY = layout.corridor.y_end + 1
  const scale = Math.min(
    (width - 2 * margin) / (maxX - minX),
    (height - 2 * margin) / (maxY - minY),
  )
  return {
    scale,
    toX: (worldX) => margin + (worldX - minX) * scale,
    toY: (worldY) => height - margin - (worldY - minY) * scale,
  }
}

const SIDE_COLORS = { left: '#4a90d9', right: '#e0863a' }

function actorColor(actor: ActorPayload): string {
  if (actor.kind === 'pedestrian') return SIDE_COLORS[actor.side]
  return actor.kind === 'vehicle' ? '#555566' : '#999999'
}

export function renderFrame(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  layout: ScenarioStartMsg,
  state: StateMsg | null,
  vehicleRadius = 1.2,
): void {
  const view = makeViewport(layout, width, height)
  ctx.clearRect(0, 0, width, height)
  ctx.fillStyle = '#1c1f26'
  ctx.fillRect(0, 0, width, height)

  // corridor: road surface plus the invisible barrier walls made visible
  const { corridor } = layout
  const roadLeft = view.toX(corridor.x_min)
  const roadRight = view.toX(corridor.x_max)
  ctx.fillStyle = '#2d323d'
  ctx.fillRect(roadLeft, view.toY(corridor.y_end), roadRight - roadLeft, height)
  ctx.strokeStyle = '#f05050'
  ctx.setLineDash([8, 6])
  ctx.lineWidth = 2
  for (const x of [roadLeft, roadRight]) {
    ctx.beginPath()
    ctx.moveTo(x, 0)
    ctx.lineTo(x, height)
    ctx.stroke()
  }
  ctx.beginPath()
  ctx.moveTo(roadLeft, view.toY(corridor.y_end))
  ctx.lineTo(roadRight, view.toY(corridor.y_end))
  ctx.stroke()
  ctx.setLineDash([])

  // target marker
  const [tx, ty] = layout.target
  ctx.strokeStyle = '#69d26a'
  ctx.lineWidth = 2
  ctx.beginPath()
  ctx.arc(view.toX(tx), view.toY(ty), 6, 0, Math.PI * 2)
  ctx.stroke()

  for (const actor of layout.actors) {
    ctx.fillStyle = actorColor(actor)
    ctx.beginPath()
    ctx.arc(
      view.toX(actor.position[0]),
      view.toY(actor.position[1]),
      Math.max(3, actor.radius * view.scale),
      0,
      Math.PI * 2,
    )
    ctx.fill()
  }

  if (state !== null) {
    const [vx, vy] = state.position
    const px = view.toX(vx)
    const py = view.toY(vy)
    const r = Math.max(6, vehicleRadius * view.scale)
    ctx.save()
    ctx.translate(px, py)
    ctx.rotate(state.heading) // heading 0 = up-screen; positive = clockwise
    ctx.fillStyle = '#f4f4f4'
    ctx.beginPath()
    ctx.moveTo(0, -r)
    ctx.lineTo(r * 0.7, r)
    ctx.lineTo(-r * 0.7, r)
    ctx.closePath()
    ctx.fill()
    ctx.strokeStyle = '#f05050'
    ctx.lineWidth = 2
    ctx.beginPath()
    ctx.moveTo(0, 0)
    ctx.lineTo(0, -r * 1.5)
    ctx.stroke()
    ctx.restore()

    ctx.fillStyle = '#f4f4f4'
    ctx.font = '16px monospace'
    ctx.fillText(`${state.speed.toFixed(1)} m/s`, 12, 24)
    ctx.fillText(`tick ${state.tick}`, 12, 44)
  }
}

/**
 * Page wiring: start menu -> live session view -> results screen.
 * All simulation state comes from the server; this file only moves
 * messages and pixels.
 */

import { InputPump, KEEPALIVE_MS } from './input.js'
import { buildHelloConfig, fetchListing, type ScenarioListing } from './menu.js'
import { makeAction, makeHello } from './protocol.js'
import { renderFrame } from './render.js'
import { connectionLost, initialState, reduce, type SessionState } from './session.js'
import { connectWebSocket, type Transport } from './transport.js'

const $ = (id: string) => document.getElementById(id) as HTMLElement

let state: SessionState = initialState()
let transport: Transport | null = null
let pump: InputPump | null = null
let keepaliveTimer: ReturnType<typeof setInterval> | null = null

function serverBase(): string {
  const input = $('server') as HTMLInputElement
  return input.value.replace(/\/+$/, '')
}

function setState(next: SessionState): void {
  state = next
  syncDom()
}

function syncDom(): void {
  $('menu').style.display = state.phase === 'menu' ? 'block' : 'none'
  $('game').style.display =
    state.phase === 'running' || state.phase === 'collided' ? 'block' : 'none'
  $('results').style.display = state.phase === 'results' ? 'block' : 'none'
  $('errorbox').style.display = state.phase === 'error' ? 'block' : 'none'
  $('overlay').style.display = state.phase === 'collided' ? 'block' : 'none'
  $('overlay').textContent = state.collisionText
  $('errortext').textContent = state.errorText
  if (state.phase === 'results') {
    const rows = state.results
      .map(
        (r) =>
          `<tr><td>${r.test_num}</td><td>${r.scenario_name}</td><td>${r.outcome}</td>` +
          `<td>${r.group_member_names || '-'}</td><td>${r.impact_speed.toFixed(2)}</td>` +
          `<td>${r.tick}</td></tr>`,
      )
      .join('')
    $('resultrows').innerHTML = rows
  }
  if (state.phase === 'error' || state.phase === 'results') stopSession()
}

function stopSession(): void {
  if (keepaliveTimer !== null) {
    clearInterval(keepaliveTimer)
    keepaliveTimer = null
  }
  pump?.disable()
}

async function loadMenu(): Promise<void> {
  const status = $('menustatus')
  status.textContent = 'loading scenario list...'
  try {
    const listing = await fetchListing(serverBase())
    fillMenu(listing)
    status.textContent = ''
  } catch (err) {
    status.textContent = `${String(err)} - is the server running?`
  }
}

function fillMenu(listing: ScenarioListing): void {
  const fileSelect = $('file') as HTMLSelectElement
  const modeSelect = $('mode') as HTMLSelectElement
  fileSelect.innerHTML = ''
  modeSelect.innerHTML = '<option value="all">all scenarios in order</option>'
  for (const file of listing.files) {
    const option = document.createElement('option')
    option.value = file.id
    option.textContent = file.id
    fileSelect.appendChild(option)
    for (const scenario of file.scenarios) {
      const single = document.createElement('option')
      single.value = String(scenario.test_num)
      single.textContent = `only #${scenario.test_num}: ${scenario.name}`
      modeSelect.appendChild(single)
    }
  }
}

async function startSession(): Promise<void> {
  const fileSelect = $('file') as HTMLSelectElement
  const modeSelect = $('mode') as HTMLSelectElement
  const mode =
    modeSelect.value === 'all' ? ('all' as const) : { testNum: Number(modeSelect.value) }
  const wsUrl = serverBase().replace(/^http/, 'ws') + '/ws'
  try {
    transport = await connectWebSocket(wsUrl, {
      onMessage: (msg) => setState(reduce(state, msg)),
      onClose: () => setState(connectionLost(state)),
    })
  } catch (err) {
    setState({ ...state, phase: 'error', errorText: String(err) })
    return
  }
  transport.send(makeHello(buildHelloConfig(fileSelect.value, mode)))
  pump = new InputPump((control) => {
    transport?.send(makeAction(state.latest?.tick ?? 0, control))
  })
  keepaliveTimer = setInterval(() => {
    if (state.phase === 'running' || state.phase === 'collided') pump?.keepalive()
  }, KEEPALIVE_MS)
  setState({ ...state, phase: 'connecting' })
}

function bindKeys(): void {
  const map: Record<string, 'left' | 'right'> = { ArrowLeft: 'left', ArrowRight: 'right' }
  window.addEventListener('keydown', (event) => {
    const key = map[event.key]
    if (key !== undefined) {
      event.preventDefault()
      pump?.setKey(key, true)
    }
  })
  window.addEventListener('keyup', (event) => {
    const key = map[event.key]
    if (key !== undefined) pump?.setKey(key, false)
  })
}

function renderLoop(): void {
  const canvas = $('view') as HTMLCanvasElement
  const ctx = canvas.getContext('2d')
  if (ctx !== null && state.layout !== null && state.phase !== 'menu') {
    renderFrame(ctx, canvas.width, canvas.height, state.layout, state.latest)
  }
  requestAnimationFrame(renderLoop)
}

function restart(): void {
  stopSession()
  transport?.close()
  transport = null
  setState(initialState())
  void loadMenu()
}

window.addEventListener('DOMContentLoaded', () => {
  bindKeys()
  $('connect').addEventListener('click', () => void startSession())
  $('reload').addEventListener('click', () => void loadMenu())
  $('retry').addEventListener('click', restart)
  $('again').addEventListener('click', restart)
  void loadMenu()
  renderLoop()
})

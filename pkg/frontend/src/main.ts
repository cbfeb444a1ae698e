import { ReviewApi } from './api'
import { Session } from './state'
import { indexTree } from './taxonomy'
import { View } from './view'

function annotatorId(): string {
  const fromQuery = new URLSearchParams(window.location.search).get('annotator')
  if (fromQuery) {
    window.localStorage.setItem('annotator', fromQuery)
    return fromQuery
  }
  const stored = window.localStorage.getItem('annotator')
  if (stored) return stored
  const entered = window.prompt('annotator id?') || `anon-${Date.now()}`
  window.localStorage.setItem('annotator', entered)
  return entered
}

async function boot() {
  const rootEl = document.getElementById('app') as HTMLElement
  const whoEl = document.getElementById('who') as HTMLElement
  const api = new ReviewApi('')
  const annotator = annotatorId()
  whoEl.textContent = annotator

  let view: View | null = null
  const session = new Session(api, annotator, {
    changed: (screen) => view?.render(screen),
    notice: (message) => view?.notice(message),
  })

  try {
    const tree = indexTree(await api.taxonomy())
    view = new View(rootEl, session, tree)
  } catch (error) {
    rootEl.textContent = `cannot reach the review service: ${error}`
    return
  }

  document.addEventListener('keydown', (event) => {
    if ((event.target as HTMLElement)?.tagName === 'INPUT') return
    if (event.key === 'a') void session.act('accept')
    else if (event.key === 'r') void session.act('reject')
    else if (event.key === 'l') session.toggleBrowser()
  })

  await session.advance()
}

void boot()

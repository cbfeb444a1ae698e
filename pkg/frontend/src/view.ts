/** DOM rendering for the review screens. */
import type { Task } from './api'
import type { Screen, Session } from './state'
import { PathNode, filterTree, initialExpansion } from './taxonomy'

export class View {
  private expanded = new Set<string>()
  private query = ''
  private taskShown: string | null = null

  constructor(
    private readonly root: HTMLElement,
    private readonly session: Session,
    private readonly tree: PathNode[],
  ) {}

  notice(message: string) {
    const banner = document.createElement('div')
    banner.className = 'notice'
    banner.textContent = message
    this.root.prepend(banner)
    setTimeout(() => banner.remove(), 2500)
  }

  render(screen: Screen) {
    this.root.innerHTML = ''
    switch (screen.kind) {
      case 'loading':
        this.root.appendChild(el('p', 'muted', 'loading…'))
        break
      case 'done': {
        const card = el('div', 'card done-card')
        card.appendChild(el('h2', '', 'All done'))
        card.appendChild(el('p', '', 'No tasks left for this annotator. Thank you!'))
        this.root.appendChild(card)
        break
      }
      case 'error': {
        const card = el('div', 'card error-card')
        card.appendChild(el('h2', '', 'Connection trouble'))
        card.appendChild(el('p', 'error-message', screen.message))
        const retry = el('button', 'primary', 'Retry')
        retry.addEventListener('click', () => void this.session.retry())
        card.appendChild(retry)
        this.root.appendChild(card)
        break
      }
      case 'task':
        if (this.taskShown !== screen.task.task_id) {
          this.taskShown = screen.task.task_id
          this.expanded = initialExpansion(screen.task.proposed_label)
          this.query = ''
        }
        this.renderTask(screen.task, screen.browserOpen, screen.selected)
        break
    }
  }

  private renderTask(task: Task, browserOpen: boolean, selected: string | null) {
    const card = el('div', 'card task-card')
    card.appendChild(el('div', 'task-meta', `${task.doc_id} · ${task.span_id}`))

    const sentence = el('p', 'sentence')
    sentence.appendChild(document.createTextNode(task.text.slice(0, task.char_start)))
    const mark = el('mark', 'highlight', task.text.slice(task.char_start, task.char_end))
    sentence.appendChild(mark)
    sentence.appendChild(document.createTextNode(task.text.slice(task.char_end)))
    card.appendChild(sentence)

    const label = el('div', 'proposed')
    label.appendChild(el('span', 'muted', 'proposed: '))
    label.appendChild(el('code', 'label-path', task.proposed_label))
    card.appendChild(label)

    const controls = el('div', 'controls')
    controls.appendChild(this.button('Accept', 'a', () => void this.session.act('accept')))
    controls.appendChild(this.button('Reject', 'r', () => void this.session.act('reject')))
    const relabel = this.button('Relabel…', 'l', () => this.session.toggleBrowser())
    controls.appendChild(relabel)
    card.appendChild(controls)

    if (browserOpen) {
      card.appendChild(this.renderBrowser(task, selected))
    }
    this.root.appendChild(card)
  }

  private renderBrowser(task: Task, selected: string | null): HTMLElement {
    const panel = el('div', 'browser')
    const search = document.createElement('input')
    search.type = 'search'
    search.placeholder = 'filter labels…'
    search.value = this.query
    search.addEventListener('input', () => {
      this.query = search.value
      this.render(this.session.screen)
      const again = this.root.querySelector('input[type=search]') as HTMLInputElement | null
      again?.focus()
      again?.setSelectionRange(this.query.length, this.query.length)
    })
    panel.appendChild(search)

    const treeBox = el('div', 'tree')
    const visible = filterTree(this.tree, this.query)
    for (const node of visible) treeBox.appendChild(this.renderNode(node, selected))
    panel.appendChild(treeBox)

    const footer = el('div', 'browser-footer')
    const chosen = el('code', 'label-path', selected ?? '(pick a label)')
    footer.appendChild(chosen)
    const confirm = el('button', 'primary', 'Submit relabel') as HTMLButtonElement
    confirm.disabled = selected === null
    confirm.addEventListener('click', () => void this.session.act('relabel'))
    footer.appendChild(confirm)
    panel.appendChild(footer)
    return panel
  }

  private renderNode(node: PathNode, selected: string | null): HTMLElement {
    const box = el('div', 'node')
    const row = el('div', 'node-row')
    if (node.children.length > 0) {
      const toggle = el('button', 'twisty', this.expanded.has(node.path) ? '▾' : '▸')
      toggle.addEventListener('click', () => {
        if (this.expanded.has(node.path)) this.expanded.delete(node.path)
        else this.expanded.add(node.path)
        this.render(this.session.screen)
      })
      row.appendChild(toggle)
    } else {
      row.appendChild(el('span', 'twisty-spacer', ''))
    }
    const pick = el('button', 'node-name' + (node.path === selected ? ' selected' : ''), node.name)
    pick.title = node.path
    pick.addEventListener('click', () => this.session.select(node.path))
    row.appendChild(pick)
    box.appendChild(row)
    if (this.expanded.has(node.path) || this.query.trim()) {
      const kids = el('div', 'children')
      for (const child of node.children) kids.appendChild(this.renderNode(child, selected))
      box.appendChild(kids)
    }
    return box
  }

  private button(text: string, key: string, onClick: () => void): HTMLElement {
    const b = el('button', 'action', `${text} `)
    b.appendChild(el('kbd', '', key))
    b.addEventListener('click', onClick)
    return b
  }
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag)
  if (className) node.className = className
  if (text !== undefined) node.textContent = text
  return node
}

// Thin client: the server owns the skeleton, this page only displays it and
// forwards edits. Polling picks up changes made by other clients.
const table = document.getElementById("keypoints");
const status = document.getElementById("status");
let revision = -1;
let editing = false;

function setStatus(text, stale) {
  status.textContent = text;
  status.className = stale ? "stale" : "";
}

function refreshPreview() {
  const az = document.getElementById("azimuth").value;
  const polar = document.getElementById("polar").value;
  const q = `?azimuth=${az}&polar=${polar}&radius=1.6&rev=${revision}`;
  document.getElementById("pose").src = "/api/preview/pose" + q;
  document.getElementById("depth").src = "/api/preview/depth" + q;
}

function render(state) {
  revision = state.revision;
  table.innerHTML = "";
  for (const [name, p] of Object.entries(state.skeleton.keypoints)) {
    const row = table.insertRow();
    row.insertCell().textContent = name;
    p.forEach((v, axis) => {
      const input = document.createElement("input");
      input.type = "number";
      input.step = "0.01";
      input.value = v.toFixed(3);
      input.onfocus = () => { editing = true; };
      input.onblur = () => { editing = false; };
      input.onchange = () => {
        const next = [...p];
        next[axis] = parseFloat(input.value);
        send("PUT", "/api/skeleton/keypoint/" + name, next);
      };
      row.insertCell().appendChild(input);
    });
  }
  setStatus(`revision ${state.revision}` + (state.stale ? ", mesh out of date" : ", mesh current"), state.stale);
  refreshPreview();
}

async function poll() {
  if (editing) return;
  const res = await fetch("/api/skeleton");
  if (!res.ok) return;
  const state = await res.json();
  if (state.revision !== revision || table.rows.length === 0) render(state);
}

async function send(method, url, body) {
  const res = await fetch(url, {
    method,
    headers: { "Content-Type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const data = await res.json().catch(() => ({}));
  if (!res.ok) setStatus(data.error || res.statusText, true);
  await poll();
  return data;
}

document.getElementById("build").onclick = async () => {
  setStatus("building...");
  const mesh = await send("POST", "/api/mesh", {});
  if (mesh.mesh_id) setStatus(`mesh ${mesh.mesh_id}: ${mesh.triangles} triangles`);
};
document.getElementById("reset").onclick = () => send("POST", "/api/skeleton/reset");
document.getElementById("azimuth").oninput = refreshPreview;
document.getElementById("polar").oninput = refreshPreview;

poll();
setInterval(poll, 2000);

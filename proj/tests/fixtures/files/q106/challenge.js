// Render the puzzle board and stash the working values for later rounds.
function computeAnswer() {
  const values = [42, 23, 2, 88, 37, 15];
  return values;
}

document.body.dataset.ready = String(computeAnswer().length);

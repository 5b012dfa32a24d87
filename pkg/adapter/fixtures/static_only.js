// Mentions lodash without ever loading it: only the static pass can see it.
function pad(text, width) {
  if (process.env.USE_THIRD_PARTY_PAD) {
    const { padStart } = require("lodash");
    return padStart(text, width);
  }
  return String(text).padStart(width);
}

module.exports = { pad };

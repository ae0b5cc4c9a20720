// Public-suffix snapshot pinned in-repo. Curated subset of the public suffix
// list covering the TLDs this tool encounters in capture logs plus wildcard
// and exception rule forms; extend here if logs carry hosts outside it.
// Unlisted TLDs fall back to the implicit '*' rule (last label).

namespace caudit::psl_snapshot {

const char* kRules = R"PSL(
// generic
com
net
org
edu
gov
mil
int
info
biz
name
pro
aero
coop
museum
mobi
travel
jobs
cat
tel
post
xxx
asia
io
ai
app
dev
page
xyz
site
online
store
tech
cloud
me
tv
cc
ws
la
sh
ac
example
// europe
uk
co.uk
org.uk
me.uk
ltd.uk
plc.uk
net.uk
sch.uk
ac.uk
gov.uk
nhs.uk
police.uk
de
fr
it
es
pt
nl
be
at
ch
se
no
fi
dk
ie
pl
cz
sk
hu
ro
bg
gr
tr
ru
su
ua
by
kz
eu
// asia pacific
jp
co.jp
or.jp
ne.jp
ac.jp
ad.jp
ed.jp
go.jp
gr.jp
lg.jp
cn
com.cn
net.cn
org.cn
edu.cn
gov.cn
ac.cn
hk
com.hk
edu.hk
gov.hk
idv.hk
net.hk
org.hk
tw
com.tw
net.tw
org.tw
edu.tw
gov.tw
kr
co.kr
ne.kr
or.kr
re.kr
go.kr
in
co.in
net.in
org.in
firm.in
gen.in
ind.in
ac.in
edu.in
res.in
gov.in
au
com.au
net.au
org.au
edu.au
gov.au
asn.au
id.au
nz
co.nz
net.nz
org.nz
govt.nz
ac.nz
sg
com.sg
net.sg
org.sg
edu.sg
gov.sg
// americas
ca
us
mx
com.mx
net.mx
org.mx
edu.mx
gob.mx
br
com.br
net.br
org.br
gov.br
edu.br
ar
com.ar
net.ar
org.ar
edu.ar
gob.ar
cl
co
com.co
net.co
org.co
// africa
za
co.za
net.za
org.za
web.za
// wildcard + exception forms
*.ck
!www.ck
*.bd
*.er
// private registries
github.io
githubusercontent.com
gitlab.io
netlify.app
vercel.app
herokuapp.com
appspot.com
web.app
firebaseapp.com
azurewebsites.net
cloudfront.net
s3.amazonaws.com
blogspot.com
)PSL";

}  // namespace caudit::psl_snapshot

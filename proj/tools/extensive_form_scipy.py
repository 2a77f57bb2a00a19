# Independent extensive-form LP for instance files (scipy HiGHS); prints the optimum per file.
# Used to pin the optima recorded in tests/fixtures/optima.json.
import json, sys, numpy as np
from scipy.optimize import linprog
def ef(path):
    d=json.load(open(path)); T=d["horizon"]; x0=np.array(d["x0"])
    nodes=[(0,-1,1.0,None)]  # stage,parent,prob,real
    layer=[0]
    for t in range(1,T+1):
        st=d["stages"][t-1]; new=[]
        for n in layer:
            for j,r in enumerate(st["realizations"]):
                nodes.append((t,n,nodes[n][2]*r["probability"],j)); new.append(len(nodes)-1)
        layer=new
    # variables: x_n (dim) + s_n per node
    idx={}; nv=0
    for n,(t,_,_,_) in enumerate(nodes):
        if t==0: continue
        dim=d["stages"][t-1]["state_dim"]; idx[n]=(nv,nv+dim); nv+=dim+1
    c=np.zeros(nv); Aub=[];bub=[];Aeq=[];beq=[];bounds=[None]*nv
    for n,(t,par,p,j) in enumerate(nodes):
        if t==0: continue
        st=d["stages"][t-1]; r=st["realizations"][j]; a,b=idx[n]; s=b
        for k in range(a,b): bounds[k]=(st["state_lower"][k-a],st["state_upper"][k-a])
        bounds[s]=(None,None); c[s]=p
        def xpart(row,coef,rhs):
            coef=np.array(coef)
            if par==0: return rhs-coef@x0
            pa,pb=idx[par]; row[pa:pb]+=coef; return rhs
        for pc in r["cost_pieces"]:
            row=np.zeros(nv); row[a:b]+=pc["slope_y"]; row[s]=-1
            rhs=xpart(row,pc["slope_x"],-pc["offset"]); Aub.append(row); bub.append(rhs)
        for g in r.get("ineq_constraints",[]):
            for pc in g:
                row=np.zeros(nv); row[a:b]+=pc["slope_y"]
                rhs=xpart(row,pc["slope_x"],-pc["offset"]); Aub.append(row); bub.append(rhs)
        for i in range(len(r["A"])):
            row=np.zeros(nv); row[a:b]+=r["A"][i]
            rhs=xpart(row,r["B"][i],r["b"][i]); Aeq.append(row); beq.append(rhs)
    res=linprog(c,A_ub=np.array(Aub) if Aub else None,b_ub=bub or None,A_eq=np.array(Aeq) if Aeq else None,b_eq=beq or None,bounds=bounds,method="highs")
    return res.fun
for f in sys.argv[1:]: print(f, repr(ef(f)))
